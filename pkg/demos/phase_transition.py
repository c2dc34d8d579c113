"""Small phase-transition sweep through the experiment harness.

Success rate of exact recovery over (N, m) for d=4, r=2 and 5% outliers,
then SVG plots of the mean traces and the success grid.

    python demos/phase_transition.py [out_dir]
"""

import sys

from robust_tt.harness import ExperimentSpec, minimal_m, run_experiment, success_grid
from robust_tt.plotting import plot_results

out = sys.argv[1] if len(sys.argv) > 1 else "phase_results"
spec = ExperimentSpec(N=[3, 4], d=[4], r=[2], m=[40, 80, 130, 200], p_s=[0.05],
                      lam=0.07, q=0.99, solvers=["psubgm"], trials=5, trace_every=10)
summary = run_experiment(spec, out)

grid = success_grid(summary, "psubgm")
print("success rate (rows N, columns m)")
for N, row in grid.items():
    cells = "  ".join(f"{m}:{rate:.1f}" for m, rate in row.items())
    print(f"N={N}  {cells}   minimal m at 90%: {minimal_m(row)}")

for path in plot_results(out):
    print("wrote", path)
