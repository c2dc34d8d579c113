"""Recovery metrics and the rotation-invariant factor distance.

The factor distance compares two left-orthogonal TT representations up to the
gauge ``X_i(s) -> R_{i-1}^T X_i(s) R_i``:

    dist^2 = min_R  sum_{i<N} sigma_bar^2 ||L(X_i) - L_R(X*_i)||_F^2
                    + ||L(X_N) - L_R(X*_N)||_2^2

No closed form exists because neighbouring rotations couple inside one
factor.  ``factor_distance`` runs block-coordinate descent: with all other
rotations fixed, the best ``R_i`` is an orthogonal Procrustes solution.  The
value it returns is attained by the reported rotations, so it upper-bounds
the true minimum.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StructureError
from .manifold import procrustes_rotation, stiefel_project
from .rng import derive_seed, rng_from_seed
from .sensing import ProbeStats, as_dense
from .solvers import _factor_grads, full_subgradient
from .tt import (
    TTTensor,
    left_unfold,
    orthogonality_residuals,
    spectral_summary,
    tt_svd,
    tt_to_dense,
)

MAX_SWEEPS = 200
REL_TOL = 1e-10
LEFT_ORTH_TOL = 1e-8


def recovery_error(x, x_star):
    """Relative squared error ``||x - x*||_F^2 / ||x*||_F^2``."""
    x, x_star = as_dense(x), as_dense(x_star)
    if x.shape != x_star.shape:
        raise StructureError(f"shape mismatch {x.shape} vs {x_star.shape}")
    ref = float(np.sum(x_star ** 2))
    if ref == 0.0:
        raise ConfigurationError("ground truth is zero")
    return float(np.sum((x - x_star) ** 2) / ref)


@dataclass
class FactorDistanceReport:
    dist2: float
    rotations: list
    converged: bool
    sweeps: int
    bounds_lower_ok: bool = None
    bounds_upper_ok: bool = None
    history: list = field(default_factory=list, repr=False)

    def to_json(self):
        return {
            "dist2": self.dist2,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "bounds_lower_ok": self.bounds_lower_ok,
            "bounds_upper_ok": self.bounds_upper_ok,
        }


def rotate_factors(tt, rotations):
    """Factors ``R_{i-1}^T X_i(s) R_i`` with ``R_0 = R_N = 1``."""
    rs = [np.ones((1, 1))] + [np.asarray(r) for r in rotations] + [np.ones((1, 1))]
    return [np.einsum("ab,asc,cd->bsd", rs[i], f, rs[i + 1]) for i, f in enumerate(tt.factors)]


def _objective(tt, tt_star, rotations, w):
    rotated = rotate_factors(tt_star, rotations)
    n = tt.order
    return float(sum((w if i < n - 1 else 1.0) * np.sum((f - g) ** 2)
                     for i, (f, g) in enumerate(zip(tt.factors, rotated))))


def _validate_pair(tt, tt_star):
    if tt.dims != tt_star.dims or tt.ranks != tt_star.ranks:
        raise StructureError("factor sets differ in dims or ranks")
    for name, t in (("tt", tt), ("tt_star", tt_star)):
        res = orthogonality_residuals(t)
        if res and max(res) > LEFT_ORTH_TOL:
            raise ConfigurationError(f"{name} is not left-orthogonal (residual {max(res):.2e})")


def _procrustes_target(tt, tt_star, rs, i, w, greedy):
    # rs holds R_0..R_N; returns M with argmax_R <M, R> the best R_i
    n = tt.order
    wi = w if i < n - 1 else 1.0
    b = np.einsum("ab,asc->bsc", rs[i - 1], tt_star.factors[i - 1])
    M = wi * np.einsum("bsc,bsd->cd", b, tt.factors[i - 1])
    if not greedy:
        wn = w if i + 1 < n else 1.0
        c = np.einsum("asc,cd->asd", tt_star.factors[i], rs[i + 1])
        M = M + wn * np.einsum("asd,bsd->ab", c, tt.factors[i])
    return M


def _alternate(tt, tt_star, rs, w):
    n = tt.order
    history = [_objective(tt, tt_star, rs[1:n], w)]
    converged = False
    sweeps = 0
    while sweeps < MAX_SWEEPS and history[-1] > 0.0:
        sweeps += 1
        trial = list(rs)
        for i in range(1, n):
            trial[i] = procrustes_rotation(_procrustes_target(tt, tt_star, trial, i, w, greedy=False))
        prev, cur = history[-1], _objective(tt, tt_star, trial[1:n], w)
        # a sweep that fails to decrease (roundoff level) is discarded
        if cur < prev:
            rs = trial
            history.append(cur)
        if prev - cur <= REL_TOL * prev:
            converged = True
            break
    else:
        converged = converged or history[-1] == 0.0
    return rs, history, converged, sweeps


def factor_distance(tt, tt_star, sigma_bar):
    """Rotation-minimized, ``sigma_bar``-weighted distance between factor sets.

    Two starts are tried: all rotations at the identity, and a greedy
    left-to-right sweep in which each ``R_i`` only aligns factor ``i``.  The
    better end point is returned.
    """
    _validate_pair(tt, tt_star)
    n = tt.order
    w = float(sigma_bar) ** 2
    if n == 1:
        val = float(np.sum((tt.factors[0] - tt_star.factors[0]) ** 2))
        return FactorDistanceReport(val, [], True, 0, history=[val])

    ident = [np.ones((1, 1))] + [np.eye(r) for r in tt.ranks] + [np.ones((1, 1))]
    best = _alternate(tt, tt_star, [r.copy() for r in ident], w)

    greedy = [r.copy() for r in ident]
    for i in range(1, n):
        greedy[i] = procrustes_rotation(_procrustes_target(tt, tt_star, greedy, i, w, greedy=True))
    other = _alternate(tt, tt_star, greedy, w)
    if other[1][-1] < best[1][-1]:
        best = other

    rs, history, converged, sweeps = best
    return FactorDistanceReport(max(history[-1], 0.0), rs[1:n], converged, sweeps, history=history)


def _rank_sum(ranks):
    n = len(ranks) + 1
    return n + 1 + sum(ranks[1:n - 1])


def distance_bounds_check(tt, tt_star, report=None, sigma_bar_star=None):
    """Evaluate the two-sided bound between ``||X - X*||_F^2`` and ``dist^2``.

    Returns a dict with the precondition ``sigma_bar^2(X) <= 9/4 sigma_bar^2(X*)``
    and both inequalities evaluated on the achieved ``dist^2``.  Only the upper
    bound is guaranteed for an achieved (not certified minimal) distance.
    """
    x, xs = tt_to_dense(tt), tt_to_dense(tt_star)
    ss = spectral_summary(xs, tt_star.ranks)
    sx = spectral_summary(x, tt.ranks)
    sbar = ss.sigma_max if sigma_bar_star is None else sigma_bar_star
    if report is None:
        report = factor_distance(tt, tt_star, sbar)
    err2 = float(np.sum((x - xs) ** 2))
    n = tt.order
    lower = report.dist2 / (8.0 * _rank_sum(tt.ranks) * ss.kappa ** 2)
    upper = 9.0 * n / 4.0 * report.dist2
    out = {
        "precondition": sx.sigma_max ** 2 <= 9.0 * ss.sigma_max ** 2 / 4.0,
        "err2": err2,
        "lower": lower,
        "upper": upper,
        "lower_ok": err2 >= lower,
        "upper_ok": err2 <= upper,
    }
    report.bounds_lower_ok = out["lower_ok"]
    report.bounds_upper_ok = out["upper_ok"]
    return out


# --------------------------------------------------------------------------
# regularity probes


def regularity_inner(tt, tt_star, grads, rotations):
    """``sum_i <L(X_i) - L_R(X*_i), P_i(grad_i)>`` with ``P_N`` the identity."""
    rotated = rotate_factors(tt_star, rotations)
    n = tt.order
    total = 0.0
    for i, (f, g, fs) in enumerate(zip(tt.factors, grads, rotated)):
        L = left_unfold(f)
        d = left_unfold(g)
        if i < n - 1:
            d = stiefel_project(L, d, check=False)
        total += float(np.sum((L - left_unfold(fs)) * d))
    return total


def _near_samples(x_star, ranks, trials, radius, seed):
    for j in range(trials):
        rng = rng_from_seed(derive_seed(seed, j))
        g = rng.standard_normal(x_star.shape)
        yield tt_svd(x_star + radius * g / np.linalg.norm(g), ranks)


def _star_and_ranks(x_star, ranks):
    if isinstance(x_star, TTTensor):
        ranks = x_star.ranks if ranks is None else tuple(ranks)
    if ranks is None:
        raise ConfigurationError("ranks are required for a dense ground truth")
    return as_dense(x_star), tuple(ranks)


def regularity_probe(A, y, x_star, trials, radius, seed=0, ranks=None, samples=None):
    """Sample the factored regularity inner product near the ground truth.

    Each sample draws a TT tensor at distance about ``radius`` from ``x_star``,
    aligns it with the left-orthogonal ground truth through
    :func:`factor_distance`, and evaluates :func:`regularity_inner` with the
    factor subgradients.  Positive values mean the Riemannian search
    direction points towards the truth.
    """
    xs, ranks = _star_and_ranks(x_star, ranks)
    tt_star = tt_svd(xs, ranks)
    sbar = spectral_summary(xs, ranks).sigma_max
    if samples is None:
        samples = _near_samples(xs, ranks, trials, radius, seed)
    vals = []
    for tt in samples:
        rep = factor_distance(tt, tt_star, sbar)
        grads = _factor_grads(tt, full_subgradient(A, tt_to_dense(tt), y))
        vals.append(regularity_inner(tt, tt_star, grads, rep.rotations))
    return ProbeStats.of(vals)


def full_regularity_probe(A, y, x_star, trials, radius, seed=0, ranks=None):
    """Sample ``<X - X*, subgrad f(X)>`` over low-TT-rank ``X`` near ``X*``."""
    xs, ranks = _star_and_ranks(x_star, ranks)
    vals = []
    for tt in _near_samples(xs, ranks, trials, radius, seed):
        x = tt_to_dense(tt)
        vals.append(float(np.sum((x - xs) * full_subgradient(A, x, y))))
    return ProbeStats.of(vals)
