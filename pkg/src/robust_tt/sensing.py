"""Gaussian measurement ensembles, outlier corruption and geometry probes.

Sensing tensor ``A_k`` is stored as a row of length ``prod(dims)`` in the
package's vectorization order, so ``<A_k, X> = row_k . vec(X)``.  Row ``k`` is
drawn from the Philox stream keyed by ``(master_seed, k)``; a materialized
ensemble and a streamed one therefore hold identical rows.  Both storage modes
walk the rows in the same fixed blocks, which keeps ``apply``/``adjoint``
bit-identical between them.
"""

from dataclasses import dataclass, field
from math import floor, pi, prod, sqrt

import numpy as np

from .errors import ConfigurationError, StructureError
from .rng import derive_seed, rng_from_seed, stream_rng
from .tt import TTTensor, from_vec, random_tt, tt_svd, tt_to_dense, vec

SQRT_2_OVER_PI = sqrt(2.0 / pi)

# bytes per block of sensing rows; fixes the reduction order for both modes
BLOCK_BYTES = 1 << 25
# above this footprint "auto" storage streams instead of materializing
MATERIALIZE_LIMIT = 1 << 30


def as_dense(x):
    if isinstance(x, TTTensor):
        return tt_to_dense(x)
    return np.asarray(x, dtype=float)


class GaussianEnsemble:
    """``m`` sensing tensors with i.i.d. standard normal entries.

    Parameters
    ----------
    m : int
        Number of measurements.
    dims : sequence of int
        Ambient extents ``(d1, ..., dN)``.
    master_seed : int
        Seed of the counter-based generator; row ``k`` depends only on
        ``(master_seed, k)``.
    storage : {"materialized", "streamed", "auto"}
        ``auto`` materializes when the matrix fits in ``MATERIALIZE_LIMIT``
        bytes.
    """

    def __init__(self, m, dims, master_seed, storage="auto"):
        if m < 1:
            raise ConfigurationError("m must be positive")
        self.m = int(m)
        self.dims = tuple(int(d) for d in dims)
        self.n = prod(self.dims)
        self.master_seed = int(master_seed)
        if storage == "auto":
            storage = "materialized" if 8 * self.m * self.n <= MATERIALIZE_LIMIT else "streamed"
        if storage not in ("materialized", "streamed"):
            raise ConfigurationError(f"unknown storage mode {storage!r}")
        self.storage = storage
        self.block_rows = max(1, BLOCK_BYTES // (8 * self.n))
        self._matrix = None
        if storage == "materialized":
            self._matrix = self.rows(0, self.m)
            self._matrix.flags.writeable = False

    def __repr__(self):
        return (f"GaussianEnsemble(m={self.m}, dims={self.dims}, "
                f"master_seed={self.master_seed}, storage={self.storage!r})")

    def row(self, k):
        """``vec(A_k)`` for 0-based ``k``, regenerated from its stream."""
        if not 0 <= k < self.m:
            raise IndexError(k)
        return stream_rng(self.master_seed, k).standard_normal(self.n)

    def rows(self, start, stop):
        out = np.empty((stop - start, self.n))
        for j, k in enumerate(range(start, stop)):
            out[j] = stream_rng(self.master_seed, k).standard_normal(self.n)
        return out

    def sensing_tensor(self, k):
        return from_vec(self.row(k), self.dims)

    def blocks(self):
        """Yield ``(start, stop, rows)`` over fixed row blocks."""
        for start in range(0, self.m, self.block_rows):
            stop = min(self.m, start + self.block_rows)
            if self._matrix is not None:
                yield start, stop, self._matrix[start:stop]
            else:
                yield start, stop, self.rows(start, stop)

    def matrix(self):
        """The full ``m x prod(dims)`` matrix (materialized mode only)."""
        if self._matrix is None:
            raise ConfigurationError("streamed ensemble has no materialized matrix")
        return self._matrix

    def _check_dims(self, x):
        if x.shape != self.dims:
            raise StructureError(f"tensor shape {x.shape} != ensemble dims {self.dims}")

    def apply(self, x):
        """``A(x)``: the vector of inner products ``<A_k, x>``."""
        x = as_dense(x)
        self._check_dims(x)
        v = vec(x)
        out = np.empty(self.m)
        for start, stop, blk in self.blocks():
            out[start:stop] = blk @ v
        return out

    def adjoint(self, z):
        """``sum_k z_k A_k`` as a dense tensor."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.m,):
            raise StructureError(f"adjoint input has length {z.size}, expected {self.m}")
        acc = np.zeros(self.n)
        for start, stop, blk in self.blocks():
            acc += z[start:stop] @ blk
        return from_vec(acc, self.dims)


def apply(A, x):
    return A.apply(x)


def adjoint(A, z):
    return A.adjoint(z)


# --------------------------------------------------------------------------
# corruption


def outlier_count(p_s, m):
    """``round(p_s * m)`` with halves rounded up.

    The product is first rounded to 9 decimals so that e.g. ``0.3 * 10`` is
    treated as the integer it denotes.
    """
    return int(floor(round(p_s * m, 9) + 0.5))


@dataclass(frozen=True)
class CorruptionModel:
    p_s: float
    outlier_sigma2: float = 10.0
    support_seed: int = 0
    value_seed: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p_s <= 0.5:
            raise ConfigurationError(f"outlier fraction p_s={self.p_s} outside [0, 0.5]")
        if self.outlier_sigma2 < 0:
            raise ConfigurationError("outlier variance must be nonnegative")


@dataclass(frozen=True)
class Measurements:
    """Observed ``y`` plus the outlier support (diagnostics only)."""

    y: np.ndarray
    support: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    outliers: np.ndarray = None


def corrupt(y_clean, model):
    """Add ``N(0, outlier_sigma2)`` outliers on a uniformly drawn support."""
    y_clean = np.asarray(y_clean, dtype=float)
    m = y_clean.size
    k = outlier_count(model.p_s, m)
    support = np.sort(rng_from_seed(model.support_seed).choice(m, size=k, replace=False))
    s = np.zeros(m)
    s[support] = rng_from_seed(model.value_seed).normal(0.0, sqrt(model.outlier_sigma2), size=k)
    return Measurements(y=y_clean + s, support=support, outliers=s)


# --------------------------------------------------------------------------
# problem instances


@dataclass(frozen=True)
class Problem:
    x_star: TTTensor
    ensemble: GaussianEnsemble
    measurements: Measurements
    model: CorruptionModel

    @property
    def y(self):
        return self.measurements.y


def make_problem(dims, ranks, m, p_s, *, xstar_seed, master_seed, support_seed,
                 value_seed, outlier_sigma2=10.0, storage="auto"):
    """Unit-norm random TT ground truth, Gaussian ensemble and corrupted data."""
    x_star = random_tt(dims, ranks, xstar_seed)
    A = GaussianEnsemble(m, dims, master_seed, storage=storage)
    model = CorruptionModel(p_s, outlier_sigma2, support_seed, value_seed)
    meas = corrupt(A.apply(tt_to_dense(x_star)), model)
    return Problem(x_star, A, meas, model)


# --------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class ProbeStats:
    samples: np.ndarray
    mean: float
    min: float
    max: float

    @classmethod
    def of(cls, samples):
        s = np.asarray(samples, dtype=float)
        return cls(s, float(s.mean()), float(s.min()), float(s.max()))


@dataclass(frozen=True)
class RipStats(ProbeStats):
    target: float = SQRT_2_OVER_PI
    max_deviation: float = 0.0
    mean_deviation: float = 0.0


def rip_probe(A, dims, ranks, trials, seed):
    """Sample ``(1/m)||A(X)||_1`` over unit-norm random TT tensors.

    Each sample should sit near ``sqrt(2/pi)``; the spread reflects the
    ``l1/l2`` RIP constant at these ranks.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    vals = []
    for j in range(trials):
        x = tt_to_dense(random_tt(dims, ranks, derive_seed(seed, j)))
        vals.append(np.abs(A.apply(x)).sum() / A.m)
    s = np.array(vals)
    return RipStats(s, float(s.mean()), float(s.min()), float(s.max()),
                    target=SQRT_2_OVER_PI,
                    max_deviation=float(np.max(np.abs(s - SQRT_2_OVER_PI))),
                    mean_deviation=float(abs(s.mean() - SQRT_2_OVER_PI)))


def _sharpness_candidate(rng, x_star, ranks, j):
    # even samples: rescaled independent TT tensors; odd: TT-projected
    # perturbations of the ground truth at log-uniform radius
    dims = x_star.shape
    if j % 2 == 0:
        x = tt_to_dense(random_tt(dims, ranks, int(rng.integers(2**63))))
        return x * 10.0 ** rng.uniform(-1.0, 1.0)
    g = rng.standard_normal(x_star.shape)
    radius = 10.0 ** rng.uniform(-3.0, 0.0) * np.linalg.norm(x_star)
    return tt_to_dense(tt_svd(x_star + radius * g / np.linalg.norm(g), ranks))


def sharpness_probe(A, y, x_star, ranks, trials, seed, candidates=None):
    """Sample ``[f(X) - f(X*)] / ||X - X*||_F`` over low-TT-rank ``X``.

    ``candidates`` may supply the tensors explicitly; otherwise they are drawn
    from the seed.  Samples with ``X == X*`` are skipped.
    """
    x_star = as_dense(x_star)
    y = np.asarray(y, dtype=float)
    f_star = np.abs(A.apply(x_star) - y).mean()
    rng = rng_from_seed(seed)
    if candidates is None:
        candidates = (_sharpness_candidate(rng, x_star, ranks, j) for j in range(trials))
    vals = []
    for x in candidates:
        x = as_dense(x)
        dist = np.linalg.norm(x - x_star)
        if dist == 0.0:
            continue
        vals.append((np.abs(A.apply(x) - y).mean() - f_star) / dist)
    if not vals:
        raise ConfigurationError("no admissible sharpness samples")
    return ProbeStats.of(vals)


def sharpness_bound(p_s, delta=0.0):
    """Lower bound ``(1 - 2 p_s) sqrt(2/pi) - delta`` on the sharpness ratio."""
    return (1.0 - 2.0 * p_s) * SQRT_2_OVER_PI - delta
