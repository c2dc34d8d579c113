"""Recover an order-3 TT tensor from measurements with 30% outliers.

Runs both solvers from the same truncated spectral initialization and prints
the relative error every 100 iterations.

    python demos/quickstart.py
"""

from robust_tt import (
    SolverConfig,
    StepSchedule,
    frsubgm_run,
    make_problem,
    psubgm_run,
    recovery_error,
    truncated_spectral_init,
)

dims, ranks, m, p_s = (10, 10, 10), (2, 2), 3000, 0.3
prob = make_problem(dims, ranks, m, p_s, xstar_seed=1, master_seed=2, support_seed=3, value_seed=4)
print(f"{m} measurements of a {dims} tensor, {int(round(p_s * m))} corrupted")

x0 = truncated_spectral_init(prob.ensemble, prob.y, ranks, alpha=p_s)
print(f"init squared error {recovery_error(x0, prob.x_star):.3e}")

x_p, trace_p = psubgm_run(prob.ensemble, prob.y, ranks, x0,
                          SolverConfig(StepSchedule(0.5, 0.9)), x_star=prob.x_star)
tt_f, trace_f = frsubgm_run(prob.ensemble, prob.y, ranks, x0,
                            SolverConfig(StepSchedule(0.5, 0.91)), x_star=prob.x_star)

print(f"{'t':>5} {'psubgm':>12} {'frsubgm':>12}")
for rp, rf in zip(trace_p[::100], trace_f[::100]):
    print(f"{rp.t:5d} {rp.rel_error:12.3e} {rf.rel_error:12.3e}")
print(f"final squared error psubgm {recovery_error(x_p, prob.x_star):.2e}, "
      f"frsubgm {recovery_error(tt_f, prob.x_star):.2e}")
