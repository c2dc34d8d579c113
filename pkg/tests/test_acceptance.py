"""Acceptance criteria A1-A7.

Each test records a single PASS/FAIL line (printed in the terminal summary)
and then asserts the criterion at its stated tolerance.  Monte-Carlo sweeps
go through the experiment harness with fixed master seeds.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from robust_tt.harness import ExperimentSpec, minimal_m, run_experiment, success_grid, trial_seeds
from robust_tt.sensing import SQRT_2_OVER_PI, GaussianEnsemble, make_problem, rip_probe
from robust_tt.solvers import SolverConfig, StepSchedule, frsubgm_run, psubgm_run, truncated_spectral_init
from robust_tt.tt import tt_to_dense

pytestmark = pytest.mark.acceptance

TESTS = Path(__file__).parent


def test_a1_rip_concentration(acceptance):
    t0 = time.perf_counter()
    dims, ranks = (6, 6, 6), (2, 2)
    A = GaussianEnsemble(5000, dims, master_seed=2024)
    stats = rip_probe(A, dims, ranks, 50, seed=1)
    elapsed = time.perf_counter() - t0
    rel = abs(stats.mean - SQRT_2_OVER_PI) / SQRT_2_OVER_PI
    ok = rel <= 0.05 and stats.max_deviation <= 0.10 and elapsed <= 60
    acceptance("A1", ok, f"mean={stats.mean:.5f} rel_dev={rel:.2e} max_dev={stats.max_deviation:.3e} "
                         f"time={elapsed:.1f}s")
    assert ok


def test_a2_exact_recovery_psubgm(acceptance, tmp_path):
    t0 = time.perf_counter()
    spec = ExperimentSpec(N=[3], d=[10], r=[2], m=[3000], p_s=[0.3], lam=0.5, q=0.9,
                          solvers=["psubgm"], trials=20, alpha=0.3, trace_every=10, master_seed=2)
    cell = run_experiment(spec, tmp_path, workers=1)["cells"][0]
    elapsed = time.perf_counter() - t0
    # monotone envelope: success implies a >= 1e3 drop in rel_error (1e6 in squares)
    envelope = all(f <= 1e-6 * i for f, i, in zip(cell["final_errors"], cell["init_errors"]) if f <= 1e-5)
    ok = cell["successes"] >= 18 and elapsed <= 600 and envelope
    acceptance("A2", ok, f"successes={cell['successes']}/20 worst={max(cell['final_errors']):.2e} "
                         f"envelope={envelope} time={elapsed:.0f}s")
    assert ok


@pytest.fixture(scope="module")
def order4_runs():
    out = []
    ranks = (2, 2, 2)
    for k in range(20):
        prob = make_problem((6,) * 4, ranks, 1500, 0.3, **trial_seeds(3, 0, k))
        x0 = truncated_spectral_init(prob.ensemble, prob.y, ranks, 0.3)
        _, tp = psubgm_run(prob.ensemble, prob.y, ranks, x0, SolverConfig(StepSchedule(0.5, 0.9)),
                           x_star=prob.x_star)
        _, tf = frsubgm_run(prob.ensemble, prob.y, ranks, x0, SolverConfig(StepSchedule(0.5, 0.91)),
                            x_star=prob.x_star)
        out.append(([r.rel_error for r in tp], [r.rel_error for r in tf]))
    return out


def test_a3_order_scaling(acceptance, order4_runs):
    P = np.array([p for p, _ in order4_runs])
    F = np.array([f for _, f in order4_runs])
    drop_p = P[:, 0].mean() / P[:, 1000].mean()
    drop_f = F[:, 0].mean() / F[:, 1000].mean()
    wins = int(np.sum(P[:, 1000] <= F[:, 1000]))
    ok = drop_p >= 1e3 and drop_f >= 1e3 and wins >= 16
    acceptance("A3", ok, f"drop psubgm={drop_p:.1e} frsubgm={drop_f:.1e}; psubgm final <= frsubgm "
                         f"in {wins}/20 (final means {P[:, 1000].mean():.1e} vs {F[:, 1000].mean():.1e})")
    assert ok


def test_a3_speed_ordering_before_floor(acceptance, order4_runs):
    # the same ordering read at t=100, before either solver reaches roundoff
    P = np.array([p for p, _ in order4_runs])
    F = np.array([f for _, f in order4_runs])
    wins = int(np.sum(P[:, 100] <= F[:, 100]))
    ok = wins >= 16
    acceptance("A3-t100", ok, f"psubgm <= frsubgm at t=100 in {wins}/20 "
                              f"(means {P[:, 100].mean():.1e} vs {F[:, 100].mean():.1e})")
    assert ok


def _nonincreasing(xs):
    return all(a >= b for a, b in zip(xs, xs[1:]))


def _nondecreasing(xs):
    return all(a <= b for a, b in zip(xs, xs[1:]))


def test_a4_outlier_measurement_tradeoff(acceptance, tmp_path):
    ps_axis, m_axis = [0.1, 0.3, 0.45], [1000, 2000, 3000]
    spec = ExperimentSpec(N=[3], d=[10], r=[2], m=m_axis, p_s=ps_axis, lam=0.5,
                          q={"psubgm": 0.9, "frsubgm": 0.91}, solvers=["psubgm", "frsubgm"],
                          trials=20, trace_every=10, master_seed=4)
    summary = run_experiment(spec, tmp_path, workers=1)
    ok, lines = True, []
    for solver in spec.solvers:
        by_m = success_grid(summary, solver, row_axis="m", col_axis="p_s")
        for m in m_axis:
            rates = [by_m[m][p] for p in ps_axis]
            ok &= _nonincreasing(rates)
            lines.append(f"{solver} m={m} over p_s {rates}")
        by_p = success_grid(summary, solver, row_axis="p_s", col_axis="m")
        rates = [by_p[0.3][m] for m in m_axis]
        ok &= _nondecreasing(rates)
        lines.append(f"{solver} p_s=0.3 over m {rates}")
    acceptance("A4", ok, "; ".join(lines))
    assert ok


def test_a5_phase_transition(acceptance, tmp_path):
    m_axis = [40, 60, 80, 100, 130, 160, 200, 250, 300]
    spec = ExperimentSpec(N=[3, 4, 5], d=[4], r=[2], m=m_axis, p_s=[0.05], lam=0.07, q=0.99,
                          solvers=["psubgm", "frsubgm"], trials=20, trace_every=10, master_seed=5)
    summary = run_experiment(spec, tmp_path, workers=1)
    ok, lines, mins = True, [], {}
    for solver in spec.solvers:
        grid = success_grid(summary, solver)
        mins[solver] = [minimal_m(grid[N]) for N in spec.N]
        for N in spec.N:
            rates = [grid[N][m] for m in m_axis]
            ok &= _nondecreasing(rates)
            lines.append(f"{solver} N={N} {rates}")
        ms = mins[solver]
        ok &= None not in ms and all(a < b for a, b in zip(ms, ms[1:]))
    ok &= all(f is not None and p is not None and f >= p for p, f in zip(mins["psubgm"], mins["frsubgm"]))
    acceptance("A5", ok, f"minimal m (>=90%) psubgm={mins['psubgm']} frsubgm={mins['frsubgm']}; "
                         + "; ".join(lines))
    assert ok


@pytest.fixture(scope="module")
def init_errors():
    # per m: (||x0 - x*||, scale c = <x0, x*>/||x*||^2, ||x0 - c x*||)
    out = {}
    ranks = (2, 2)
    for m in (1000, 4000):
        rows = []
        for k in range(20):
            prob = make_problem((6, 6, 6), ranks, m, 0.1, **trial_seeds(6, 0, k))
            xs = tt_to_dense(prob.x_star)
            x0 = tt_to_dense(truncated_spectral_init(prob.ensemble, prob.y, ranks, 0.1))
            c = float(np.sum(x0 * xs) / np.sum(xs * xs))
            rows.append((np.linalg.norm(x0 - xs), c, np.linalg.norm(x0 - c * xs)))
        out[m] = np.array(rows)
    return out


def test_a6_initialization_quality(acceptance, init_errors):
    e1, e4 = init_errors[1000][:, 0].mean(), init_errors[4000][:, 0].mean()
    scale = init_errors[4000][:, 1].mean()
    ratio = e4 / e1
    ok = ratio < 0.6
    acceptance("A6", ok, f"mean init error m=1000 {e1:.4f}, m=4000 {e4:.4f}, ratio {ratio:.3f} "
                         f"(mean scale <x0,x*>/||x*||^2 = {scale:.3f})")
    assert ok


def test_a6_orthogonal_component(acceptance, init_errors):
    # the trimmed average converges to a shrunk copy of x*; the part of the
    # error orthogonal to x* carries the 1/sqrt(m) decay
    p1, p4 = init_errors[1000][:, 2].mean(), init_errors[4000][:, 2].mean()
    ratio = p4 / p1
    ok = ratio < 0.6
    acceptance("A6-orth", ok, f"mean ||x0 - c x*|| m=1000 {p1:.4f}, m=4000 {p4:.4f}, ratio {ratio:.3f}")
    assert ok


PROPERTY_SUITES = [
    "test_tt.py::test_tt_svd_exact_rank_fixed_point",
    "test_tt.py::test_tt_svd_exactness_sweep",
    "test_tt.py::test_left_orthogonal_norm_identity",
    "test_tt.py::test_left_orthogonalize_random",
    "test_sensing.py::test_adjoint_identity",
    "test_tt.py::test_telescoping_expansion",
    "test_solvers.py::test_residual_signs_examples",
    "test_solvers.py::test_fixed_point_at_truth",
    "test_manifold.py::test_symmetric_component_annihilated",
    "test_manifold.py::test_projection_tangency_and_norm",
    "test_manifold.py::test_polar_examples",
    "test_manifold.py::test_polar_matches_inverse_sqrt_formula",
    "test_manifold.py::test_polar_nonexpansive",
    "test_solvers.py::test_factor_grads_chain_rule_via_telescoping",
    "test_solvers.py::test_factor_grads_n2_scalar_loop",
    "test_solvers.py::test_one_sided_finite_difference",
    "test_solvers.py::test_factor_finite_difference",
    "test_analysis.py::test_distance_error_sandwich",
    "test_analysis.py::test_gauge_rotated_copy",
    "test_solvers.py::test_schedule_ratio",
]


def test_a7_property_suites(acceptance):
    ids = [str(TESTS / node) for node in PROPERTY_SUITES]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *ids],
                          capture_output=True, text=True, cwd=TESTS.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and "failed" not in tail
    acceptance("A7", ok, f"{len(PROPERTY_SUITES)} suites: {tail}")
    assert ok, proc.stdout[-3000:]
