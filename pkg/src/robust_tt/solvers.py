"""l1-loss recovery: objective, subgradients, PSubGM, FRSubGM and initialization.

Both solvers minimize ``f(X) = (1/m) ||A(X) - y||_1`` over tensors of fixed TT
ranks.  PSubGM steps on the dense tensor and projects back with TT-SVD;
FRSubGM keeps factors ``1..N-1`` on the Stiefel manifold (left-orthogonal
form) and updates the last factor by a plain subgradient step.
"""

import logging
from dataclasses import dataclass
from math import ceil, pi, sqrt

import numpy as np

from .errors import ConfigurationError, RetractionError, SolverAbort
from .manifold import orthonormality_error, polar_retract, stiefel_project
from .sensing import as_dense
from .tt import (
    TTTensor,
    left_fold,
    left_unfold,
    spectral_summary,
    tt_svd,
    tt_to_dense,
)

log = logging.getLogger(__name__)

SQRT_2_OVER_PI = sqrt(2.0 / pi)

__all__ = [
    "StepSchedule",
    "SolverConfig",
    "TraceRecord",
    "loss_l1",
    "residual_signs",
    "full_subgradient",
    "factor_subgradients",
    "psubgm_run",
    "frsubgm_run",
    "truncated_spectral_init",
    "theoretical_schedule_psubgm",
    "theoretical_schedule_frsubgm",
]


@dataclass(frozen=True)
class StepSchedule:
    """Geometric step sizes ``mu_t = lam * q**t``."""

    lam: float
    q: float

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError("initial step must be nonnegative")
        if not 0.0 < self.q < 1.0:
            raise ConfigurationError(f"decay q={self.q} must lie in (0, 1)")

    def mu(self, t):
        # pow rather than repeated multiplication: no drift over long runs
        return self.lam * self.q ** t


@dataclass(frozen=True)
class SolverConfig:
    schedule: StepSchedule
    max_iters: int = 1000
    target_rel_error: float = 0.0
    sigma_bar_mode: str = "from_init"
    sigma_bar: float = None
    trace_every: int = 1
    track_factor_distance: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.target_rel_error < 0:
            raise ConfigurationError("target_rel_error must be >= 0")
        if self.trace_every < 1:
            raise ConfigurationError("trace_every must be >= 1")
        if self.sigma_bar_mode not in ("true_value", "from_init", "user_override"):
            raise ConfigurationError(f"unknown sigma_bar_mode {self.sigma_bar_mode!r}")
        if self.sigma_bar_mode == "user_override" and not (self.sigma_bar and self.sigma_bar > 0):
            raise ConfigurationError("user_override needs a positive sigma_bar")


@dataclass(frozen=True)
class TraceRecord:
    t: int
    objective: float
    rel_error: float = None
    mu_t: float = None
    factor_dist2: float = None

    def as_row(self):
        return [self.t, self.objective, self.rel_error, self.mu_t, self.factor_dist2]


TRACE_COLUMNS = ("t", "objective", "rel_error", "mu_t", "factor_dist2")


# --------------------------------------------------------------------------
# objective and subgradients


def loss_l1(A, x, y):
    """``(1/m) ||A(x) - y||_1``."""
    return float(np.abs(A.apply(as_dense(x)) - np.asarray(y)).mean())


def residual_signs(A, x, y):
    """``sign(<A_k, x> - y_k)`` with ``sign(0) = 0``."""
    return np.sign(A.apply(as_dense(x)) - np.asarray(y))


def full_subgradient(A, x, y):
    """``(1/m) sum_k sign(<A_k, x> - y_k) A_k``."""
    return A.adjoint(residual_signs(A, x, y)) / A.m


def _interfaces(tt):
    # prefix[i] = X^{<=i}, suffix[i] = X^{>=i+1}, both for i = 0..N
    n = tt.order
    prefix = [np.ones((1, 1))]
    for f in tt.factors:
        r0, d, r1 = f.shape
        p = prefix[-1]
        prefix.append(np.einsum("pa,asb->psb", p, f).reshape(p.shape[0] * d, r1, order="F"))
    suffix = [None] * (n + 1)
    suffix[n] = np.ones((1, 1))
    for i in range(n - 1, -1, -1):
        f = tt.factors[i]
        r0, d, r1 = f.shape
        q = suffix[i + 1]
        suffix[i] = np.einsum("asb,bq->asq", f, q).reshape(r0, d * q.shape[1], order="F")
    return prefix, suffix


def _factor_grads(tt, G):
    """Chain-rule contraction of a dense gradient ``G`` onto every factor.

    For factor ``i`` the slice gradient is ``X^{<=i-1}^T G(:, s_i, :) X^{>=i+1}^T``.
    """
    prefix, suffix = _interfaces(tt)
    grads = []
    for i, f in enumerate(tt.factors):
        r0, d, r1 = f.shape
        left = prefix[i]          # (P, r0)
        right = suffix[i + 1]     # (r1, Q)
        g = np.asarray(G).reshape(left.shape[0], d * right.shape[1], order="F")
        t = (left.T @ g).reshape(r0 * d, right.shape[1], order="F")
        grads.append(left_fold(t @ right.T, r0, d))
    return grads


def factor_subgradients(A, tt, y):
    """Subgradient of ``F(X_1, ..., X_N)`` with respect to each factor."""
    G = full_subgradient(A, tt_to_dense(tt), y)
    return _factor_grads(tt, G)


# --------------------------------------------------------------------------
# helpers shared by the two solvers


def _rel_error(x, x_star, star_norm):
    if x_star is None:
        return None
    return float(np.linalg.norm(x - x_star) / star_norm)


def _abort_if_nonfinite(objective, t, trace):
    if not np.isfinite(objective):
        raise SolverAbort(f"non-finite objective at iteration {t}", trace)


def _check_ranks(tt, ranks):
    if tuple(tt.ranks) != tuple(ranks):
        raise ConfigurationError(f"initial point has ranks {tt.ranks}, expected {tuple(ranks)}")


# --------------------------------------------------------------------------
# PSubGM


def psubgm_run(A, y, ranks, x0, cfg, x_star=None):
    """Projected subgradient method.

    ``X(t+1) = TT-SVD_r( X(t) - mu_t * subgrad f(X(t)) )``.

    Returns the final iterate (left-orthogonal TT) and the trace.  With
    ``x_star`` supplied the trace carries relative errors and
    ``cfg.target_rel_error`` enables early stopping.
    """
    y = np.asarray(y, dtype=float)
    ranks = tuple(ranks)
    _check_ranks(x0, ranks)
    xs = as_dense(x_star) if x_star is not None else None
    star_norm = np.linalg.norm(xs) if xs is not None else None
    tt = x0
    x = tt_to_dense(x0)
    trace = []
    m = A.m
    t = 0
    while True:
        r = A.apply(x) - y
        obj = float(np.abs(r).mean())
        rel = _rel_error(x, xs, star_norm)
        mu = cfg.schedule.mu(t)
        done = t >= cfg.max_iters or (
            rel is not None and cfg.target_rel_error > 0 and rel <= cfg.target_rel_error)
        if t % cfg.trace_every == 0 or done:
            trace.append(TraceRecord(t, obj, rel, mu))
        _abort_if_nonfinite(obj, t, trace)
        if done:
            break
        g = A.adjoint(np.sign(r)) / m
        if mu != 0.0 and np.any(g):
            step = x - mu * g
            if not np.all(np.isfinite(step)):
                raise SolverAbort(f"non-finite iterate at iteration {t}", trace)
            tt = tt_svd(step, ranks)
            x = tt_to_dense(tt)
        # a zero update keeps the iterate: it already has the target ranks and
        # re-projecting would only inject roundoff
        t += 1
    return tt, trace


# --------------------------------------------------------------------------
# FRSubGM


def _resolve_sigma_bar(cfg, tt0, ranks, x_star):
    if cfg.sigma_bar_mode == "user_override":
        return float(cfg.sigma_bar)
    if cfg.sigma_bar_mode == "true_value":
        if x_star is None:
            raise ConfigurationError("sigma_bar_mode='true_value' needs x_star")
        return spectral_summary(as_dense(x_star), ranks).sigma_max
    return spectral_summary(tt_to_dense(tt0), ranks).sigma_max


def frsubgm_step(tt, grads, mu, sigma_bar):
    """One Riemannian update of all factors from gradients taken at ``tt``."""
    n = tt.order
    new = []
    for i, (f, g) in enumerate(zip(tt.factors, grads)):
        r0, d, r1 = f.shape
        L = left_unfold(f)
        if i < n - 1:
            xi = (mu / sigma_bar ** 2) * stiefel_project(L, left_unfold(g), check=False)
            # the retraction maps a zero tangent vector to the base point
            if np.any(xi):
                L = polar_retract(L - xi)
        else:
            L = L - mu * left_unfold(g)
        new.append(left_fold(L, r0, d))
    return TTTensor(tuple(new), left_orthogonal=True)


def frsubgm_run(A, y, ranks, tt0, cfg, x_star=None):
    """Factorized Riemannian subgradient method on left-orthogonal factors.

    Factors ``1..N-1`` step along the tangent-projected subgradient with
    ``mu_t / sigma_bar**2`` and are retracted by the polar factor; factor
    ``N`` takes a plain step ``mu_t``.  ``sigma_bar`` follows
    ``cfg.sigma_bar_mode``.
    """
    y = np.asarray(y, dtype=float)
    ranks = tuple(ranks)
    _check_ranks(tt0, ranks)
    worst = max([orthonormality_error(left_unfold(f)) for f in tt0.factors[:-1]], default=0.0)
    if worst > 1e-8:
        raise ConfigurationError(f"initial factors are not left-orthogonal (residual {worst:.2e})")
    sigma_bar = _resolve_sigma_bar(cfg, tt0, ranks, x_star)
    xs = as_dense(x_star) if x_star is not None else None
    star_norm = np.linalg.norm(xs) if xs is not None else None
    tt_star = tt_svd(xs, ranks) if (xs is not None and cfg.track_factor_distance) else None
    if tt_star is not None:
        from .analysis import factor_distance

    tt = tt0
    trace = []
    m = A.m
    t = 0
    while True:
        x = tt_to_dense(tt)
        r = A.apply(x) - y
        obj = float(np.abs(r).mean())
        rel = _rel_error(x, xs, star_norm)
        mu = cfg.schedule.mu(t)
        done = t >= cfg.max_iters or (
            rel is not None and cfg.target_rel_error > 0 and rel <= cfg.target_rel_error)
        if t % cfg.trace_every == 0 or done:
            fd = None
            if tt_star is not None:
                fd = factor_distance(tt, tt_star, sigma_bar).dist2
            trace.append(TraceRecord(t, obj, rel, mu, fd))
        _abort_if_nonfinite(obj, t, trace)
        if done:
            break
        G = A.adjoint(np.sign(r)) / m
        grads = _factor_grads(tt, G)
        try:
            tt = frsubgm_step(tt, grads, mu, sigma_bar)
        except RetractionError as exc:
            raise RetractionError(f"iteration {t}: {exc}", trace) from exc
        t += 1
    return tt, trace


# --------------------------------------------------------------------------
# initialization


def truncation_count(alpha, m):
    """``ceil(alpha * m)`` after rounding the product to 9 decimals."""
    return int(ceil(round(alpha * m, 9)))


def truncated_spectral_init(A, y, ranks, alpha):
    """TT-SVD of the trimmed back-projection ``sum_k y_k A_k 1{|y_k| <= tau}``.

    ``tau`` is the ``ceil(alpha m)``-th largest ``|y_k|``; ties with ``tau``
    are kept.  The sum is scaled by ``1 / ((1 - alpha) m)``.
    """
    if not 0.0 <= alpha < 1.0:
        raise ConfigurationError(f"alpha={alpha} outside [0, 1)")
    y = np.asarray(y, dtype=float)
    m = y.size
    k = truncation_count(alpha, m) if alpha > 0 else 0
    mags = np.abs(y)
    if k == 0:
        keep = np.ones(m, dtype=bool)
    else:
        tau = np.sort(mags)[::-1][k - 1]
        keep = mags <= tau
    if not keep.any():
        raise ConfigurationError("truncation removed every measurement")
    z = np.where(keep, y, 0.0) / ((1.0 - alpha) * m)
    return tt_svd(A.adjoint(z), ranks)


# --------------------------------------------------------------------------
# theoretical step schedules


def _sharp_terms(delta, p_s):
    a = (1.0 - 2.0 * p_s) * SQRT_2_OVER_PI - delta
    b = SQRT_2_OVER_PI + delta
    return a, b


def theoretical_schedule_psubgm(delta, p_s, c, init_error):
    """Step schedule guaranteeing linear convergence of PSubGM.

    ``lam = a / (2 b^2) * ||X0 - X*||_F`` and
    ``q = sqrt((1 + c) (1 - 3 a^2 / (4 b^2)))`` with
    ``a = (1 - 2 p_s) sqrt(2/pi) - delta`` and ``b = sqrt(2/pi) + delta``.

    Raises ``ConfigurationError`` when ``c`` or ``delta`` violate the
    admissibility conditions or the resulting ``q`` is not below one.
    """
    if not 0.0 <= p_s < 0.5:
        raise ConfigurationError(f"p_s={p_s} outside [0, 0.5)")
    if delta < 0:
        raise ConfigurationError("delta must be nonnegative")
    c_max = 3.0 * (1.0 - 2.0 * p_s) ** 2 / (1.0 + 12.0 * p_s - 12.0 * p_s ** 2)
    if not 0.0 <= c < c_max:
        raise ConfigurationError(f"c={c} violates c < 3(1-2p_s)^2/(1+12p_s-12p_s^2) = {c_max:.6g}")
    root = sqrt(4.0 * c / (3.0 + 3.0 * c))
    delta_max = (1.0 - 2.0 * p_s - root) / (1.0 + root) * SQRT_2_OVER_PI
    if not delta < delta_max:
        raise ConfigurationError(
            f"delta={delta} violates delta < (1-2p_s-sqrt(4c/(3+3c)))/(1+sqrt(4c/(3+3c)))*sqrt(2/pi) "
            f"= {delta_max:.6g}")
    a, b = _sharp_terms(delta, p_s)
    lam = a / (2.0 * b ** 2) * init_error
    q = sqrt((1.0 + c) * (1.0 - 3.0 * a ** 2 / (4.0 * b ** 2)))
    if not q < 1.0:
        raise ConfigurationError(f"resulting decay q={q} is not below 1")
    return StepSchedule(lam, q)


def theoretical_schedule_frsubgm(delta, p_s, N, ranks, kappa, init_dist):
    """Step schedule guaranteeing linear convergence of FRSubGM.

    With ``S = N + 1 + sum_{i=2}^{N-1} r_i``:
    ``lam = a / (sqrt(2 S) (9N - 5) b^2 kappa) * dist0`` and
    ``q = sqrt(1 - a^2 / (8 S (9N - 5) b^2 kappa^2))``.
    """
    if not 0.0 <= p_s <= 0.5:
        raise ConfigurationError(f"p_s={p_s} outside [0, 0.5]")
    if delta < 0:
        raise ConfigurationError("delta must be nonnegative")
    ranks = tuple(ranks)
    if len(ranks) != N - 1:
        raise ConfigurationError(f"need {N - 1} ranks for N={N}")
    if kappa < 1:
        raise ConfigurationError("condition number must be >= 1")
    bound = (1.0 - 2.0 * p_s) * SQRT_2_OVER_PI
    if delta > bound:
        raise ConfigurationError(f"delta={delta} violates delta <= (1-2p_s)sqrt(2/pi) = {bound:.6g}")
    a, b = _sharp_terms(delta, p_s)
    S = N + 1 + sum(ranks[1:N - 1])
    lam = a / (sqrt(2.0 * S) * (9 * N - 5) * b ** 2 * kappa) * init_dist
    q = sqrt(1.0 - a ** 2 / (8.0 * S * (9 * N - 5) * b ** 2 * kappa ** 2))
    if not q < 1.0:
        raise ConfigurationError(f"resulting decay q={q} is not below 1 (delta at the admissibility boundary)")
    return StepSchedule(lam, q)
