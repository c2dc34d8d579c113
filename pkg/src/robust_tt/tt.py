"""Dense and tensor-train representations.

Dense tensors are plain ``numpy`` arrays of shape ``(d1, ..., dN)``.  The
vectorization used everywhere is first-index-fastest: entry ``(s1, ..., sN)``
(1-based) sits at position ``s1 + d1 (s2 - 1) + ... + d1...d_{N-1} (sN - 1)``,
which is numpy's Fortran order.  All reshapes in this module go through that
order, so ``unfold`` and ``left_unfold`` agree with the index formulas.

A TT factor ``X_i`` is an array of shape ``(r_{i-1}, d_i, r_i)``; its slice
``X_i[:, s, :]`` is the matrix multiplied in position ``i`` of the chain.
"""

from dataclasses import dataclass, field
from math import prod

import numpy as np

from .errors import StructureError
from .rng import rng_from_seed

__all__ = [
    "TTTensor",
    "SpectralSummary",
    "vec",
    "from_vec",
    "linear_position",
    "multi_index",
    "unfold",
    "fold",
    "left_unfold",
    "left_fold",
    "tt_to_dense",
    "left_interface",
    "right_interface",
    "tt_svd",
    "left_orthogonalize",
    "orthogonality_residuals",
    "spectral_summary",
    "random_tt",
    "telescoping_terms",
]


# --------------------------------------------------------------------------
# vectorization and unfoldings


def vec(x):
    """Flatten a dense tensor in first-index-fastest order."""
    return np.asarray(x).ravel(order="F")


def from_vec(data, dims):
    data = np.asarray(data, dtype=float)
    if data.size != prod(dims):
        raise StructureError(f"data length {data.size} != prod(dims) {prod(dims)}")
    return data.reshape(tuple(dims), order="F")


def linear_position(index, dims):
    """1-based linear position of the 1-based multi-index ``index``."""
    if len(index) != len(dims):
        raise StructureError("index order does not match dims")
    pos, stride = 1, 1
    for s, d in zip(index, dims):
        if not 1 <= s <= d:
            raise StructureError(f"index {s} out of range 1..{d}")
        pos += stride * (s - 1)
        stride *= d
    return pos


def multi_index(position, dims):
    """Inverse of :func:`linear_position`."""
    if not 1 <= position <= prod(dims):
        raise StructureError(f"position {position} out of range")
    rem = position - 1
    out = []
    for d in dims:
        out.append(rem % d + 1)
        rem //= d
    return tuple(out)


def unfold(x, i):
    """``i``-th unfolding: modes ``1..i`` index rows, ``i+1..N`` index columns."""
    x = np.asarray(x)
    if not 1 <= i <= x.ndim - 1:
        raise StructureError(f"cut index {i} outside 1..{x.ndim - 1}")
    rows = prod(x.shape[:i])
    return x.reshape(rows, -1, order="F")


def fold(mat, dims, i):
    """Inverse of :func:`unfold`."""
    dims = tuple(dims)
    if not 1 <= i <= len(dims) - 1:
        raise StructureError(f"cut index {i} outside 1..{len(dims) - 1}")
    mat = np.asarray(mat)
    if mat.shape != (prod(dims[:i]), prod(dims[i:])):
        raise StructureError(f"matrix shape {mat.shape} incompatible with dims {dims} at cut {i}")
    return mat.reshape(dims, order="F")


def left_unfold(factor):
    """Stack the slices ``X(:, s, :)`` vertically in slice order."""
    factor = np.asarray(factor)
    if factor.ndim != 3:
        raise StructureError("factor must be an order-3 array")
    r0, d, r1 = factor.shape
    return factor.reshape(r0 * d, r1, order="F")


def left_fold(mat, r_prev, d):
    mat = np.asarray(mat)
    if mat.ndim == 1:
        mat = mat[:, None]
    if mat.shape[0] != r_prev * d:
        raise StructureError(f"{mat.shape[0]} rows cannot be split as {r_prev} x {d}")
    return mat.reshape(r_prev, d, mat.shape[1], order="F")


# --------------------------------------------------------------------------
# TT container


@dataclass(frozen=True)
class TTTensor:
    """Tensor train ``[X_1, ..., X_N]`` with ``X_i`` of shape ``(r_{i-1}, d_i, r_i)``."""

    factors: tuple
    left_orthogonal: bool = False
    dims: tuple = field(init=False)
    ranks: tuple = field(init=False)

    def __post_init__(self):
        facs = []
        for f in self.factors:
            a = np.array(f, dtype=float)
            if a.ndim != 3:
                raise StructureError(f"factor of shape {a.shape} is not order 3")
            a.flags.writeable = False
            facs.append(a)
        if not facs:
            raise StructureError("a TT tensor needs at least one factor")
        if facs[0].shape[0] != 1 or facs[-1].shape[2] != 1:
            raise StructureError("boundary ranks r0 and rN must equal 1")
        for i in range(len(facs) - 1):
            if facs[i].shape[2] != facs[i + 1].shape[0]:
                raise StructureError(
                    f"rank mismatch between factor {i + 1} (trailing {facs[i].shape[2]}) "
                    f"and factor {i + 2} (leading {facs[i + 1].shape[0]})"
                )
        object.__setattr__(self, "factors", tuple(facs))
        object.__setattr__(self, "dims", tuple(f.shape[1] for f in facs))
        object.__setattr__(self, "ranks", tuple(f.shape[2] for f in facs[:-1]))

    @property
    def order(self):
        return len(self.factors)

    def left_unfoldings(self):
        return [left_unfold(f) for f in self.factors]

    @classmethod
    def from_left_unfoldings(cls, mats, dims, left_orthogonal=False):
        facs, r_prev = [], 1
        for mat, d in zip(mats, dims):
            f = left_fold(mat, r_prev, d)
            facs.append(f)
            r_prev = f.shape[2]
        return cls(tuple(facs), left_orthogonal=left_orthogonal)

    def to_dense(self):
        return tt_to_dense(self)

    def n_params(self):
        return sum(f.size for f in self.factors)


def tt_to_dense(tt):
    """Contract the chain of slices into the full array."""
    left = left_unfold(tt.factors[0])  # rows: s1
    for f in tt.factors[1:]:
        r0, d, r1 = f.shape
        p = left.shape[0]
        # new row index p + P*s keeps the first-index-fastest ordering
        left = np.einsum("pa,asb->psb", left, f).reshape(p * d, r1, order="F")
    return left[:, 0].reshape(tt.dims, order="F")


def left_interface(tt, i):
    """``X^{<=i}``: row ``(s1..si)`` is ``X_1(s1)...X_i(si)``; shape ``(d1..di, r_i)``.

    ``i = 0`` gives the 1x1 identity.
    """
    out = np.ones((1, 1))
    for f in tt.factors[:i]:
        r0, d, r1 = f.shape
        p = out.shape[0]
        out = np.einsum("pa,asb->psb", out, f).reshape(p * d, r1, order="F")
    return out


def right_interface(tt, i):
    """``X^{>=i}``: column ``(si..sN)`` is ``X_i(si)...X_N(sN)``; shape ``(r_{i-1}, di..dN)``.

    ``i = N + 1`` gives the 1x1 identity.
    """
    out = np.ones((1, 1))
    for f in reversed(tt.factors[i - 1:]):
        r0, d, r1 = f.shape
        q = out.shape[1]
        out = np.einsum("asb,bq->asq", f, out).reshape(r0, d * q, order="F")
    return out


# --------------------------------------------------------------------------
# TT-SVD and gauge operations


def _fix_signs(u, vt):
    # largest-magnitude entry of each left singular vector made positive;
    # argmax returns the lowest index on ties
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1
    vt[flip, :] *= -1
    return u, vt


def _check_ranks(dims, ranks):
    dims, ranks = tuple(dims), tuple(int(r) for r in ranks)
    if len(ranks) != len(dims) - 1:
        raise StructureError(f"need {len(dims) - 1} ranks for an order-{len(dims)} tensor, got {len(ranks)}")
    for i, r in enumerate(ranks, start=1):
        if r < 1:
            raise StructureError(f"rank r{i} = {r} must be positive")
        bound = min(prod(dims[:i]), prod(dims[i:]))
        if r > bound:
            raise StructureError(f"rank r{i} = {r} exceeds unfolding dimension {bound}")
    return ranks


def tt_svd(x, ranks, *, return_tails=False):
    """Sequential truncated SVD into left-orthogonal TT form.

    With ``return_tails=True`` also returns the discarded singular-value tail
    norm of every sweep step; ``sqrt(sum(tails**2))`` bounds the Frobenius
    reconstruction error.
    """
    x = np.asarray(x, dtype=float)
    dims = x.shape
    ranks = _check_ranks(dims, ranks)
    n = x.ndim
    factors, tails = [], []
    carry = x.reshape(dims[0], -1, order="F")
    r_prev = 1
    for i in range(n - 1):
        r = ranks[i]
        if r > carry.shape[0]:
            raise StructureError(
                f"rank r{i + 1} = {r} exceeds r{i} * d{i + 1} = {carry.shape[0]}; "
                "left-orthogonal factor impossible"
            )
        u, s, vt = np.linalg.svd(carry, full_matrices=False)
        u, vt = _fix_signs(u[:, :r].copy(), vt[:r].copy())
        tails.append(float(np.sqrt(np.sum(s[r:] ** 2))))
        factors.append(left_fold(u, r_prev, dims[i]))
        carry = s[:r, None] * vt
        r_prev = r
        carry = carry.reshape(r * dims[i + 1], -1, order="F")
    factors.append(left_fold(carry, r_prev, dims[-1]))
    out = TTTensor(tuple(factors), left_orthogonal=True)
    if return_tails:
        return out, np.array(tails)
    return out


def left_orthogonalize(tt):
    """QR sweep left to right, pushing each triangular factor into the next core."""
    facs = [np.array(f) for f in tt.factors]
    for i in range(len(facs) - 1):
        r0, d, r1 = facs[i].shape
        q, rmat = np.linalg.qr(left_unfold(facs[i]))
        # same sign convention as tt_svd keeps the output deterministic
        sgn = np.where(np.diag(rmat) < 0, -1.0, 1.0)
        q *= sgn
        rmat *= sgn[:, None]
        facs[i] = left_fold(q, r0, d)
        facs[i + 1] = np.einsum("ab,bsc->asc", rmat, facs[i + 1])
    return TTTensor(tuple(facs), left_orthogonal=True)


def orthogonality_residuals(tt):
    """``||L(X_i)^T L(X_i) - I||_F`` for ``i = 1..N-1``."""
    out = []
    for f in tt.factors[:-1]:
        L = left_unfold(f)
        out.append(float(np.linalg.norm(L.T @ L - np.eye(L.shape[1]))))
    return out


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectralSummary:
    per_cut_sigmas: tuple
    sigma_min: float
    sigma_max: float
    kappa: float
    rank_deficient: bool = False


def spectral_summary(x, ranks):
    """Smallest/largest singular values over all cuts at the declared ranks."""
    x = np.asarray(x, dtype=float)
    ranks = _check_ranks(x.shape, ranks)
    sigmas = []
    deficient = False
    for i, r in enumerate(ranks, start=1):
        mat = unfold(x, i)
        s = np.linalg.svd(mat, compute_uv=False)
        sigmas.append(s)
        tol = (s[0] if s.size else 0.0) * max(mat.shape) * np.finfo(float).eps
        if s[r - 1] <= tol:
            deficient = True
    lo = min(float(s[r - 1]) for s, r in zip(sigmas, ranks))
    hi = max(float(s[0]) for s in sigmas)
    kappa = float("inf") if deficient or lo == 0.0 else hi / lo
    return SpectralSummary(tuple(sigmas), lo, hi, kappa, deficient)


def random_tt(dims, ranks, seed):
    """Unit-norm TT: truncate an i.i.d. standard normal tensor, then normalize."""
    dims = tuple(int(d) for d in dims)
    g = rng_from_seed(seed).standard_normal(prod(dims))
    tt = tt_svd(from_vec(g, dims), ranks)
    nrm = np.linalg.norm(tt_to_dense(tt))
    facs = list(tt.factors)
    facs[-1] = facs[-1] / nrm
    return TTTensor(tuple(facs), left_orthogonal=True)


# --------------------------------------------------------------------------
# matrix-chain helper


def telescoping_terms(mats, mats_star):
    """Summands of ``A1..AN - A*1..A*N = sum_i A*1..A*_{i-1} (Ai - A*i) A_{i+1}..AN``."""
    if len(mats) != len(mats_star):
        raise StructureError("chains must have equal length")
    n = len(mats)
    terms = []
    for i in range(n):
        left = np.eye(np.shape(mats_star[0])[0])
        for a in mats_star[:i]:
            left = left @ a
        right = np.eye(np.shape(mats[-1])[1])
        for a in reversed(mats[i + 1:]):
            right = a @ right
        terms.append(left @ (np.asarray(mats[i]) - np.asarray(mats_star[i])) @ right)
    return terms
