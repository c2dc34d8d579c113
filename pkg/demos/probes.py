"""Empirical checks of the geometry behind the recovery guarantees.

* the l1/l2 ratio (1/m)||A(X)||_1 / ||X||_F concentrates at sqrt(2/pi)
* sharpness: f(X) - f(X*) grows linearly in ||X - X*||_F
* regularity: the subgradient points back towards X* near the truth

    python demos/probes.py
"""

from robust_tt import make_problem, regularity_probe, rip_probe, sharpness_probe
from robust_tt.sensing import SQRT_2_OVER_PI, sharpness_bound

dims, ranks = (6, 6, 6), (2, 2)
prob = make_problem(dims, ranks, 3000, 0.2, xstar_seed=1, master_seed=2, support_seed=3, value_seed=4)

rip = rip_probe(prob.ensemble, dims, ranks, 30, seed=5)
print(f"l1/l2 ratio: mean {rip.mean:.4f} (target {SQRT_2_OVER_PI:.4f}), "
      f"range [{rip.min:.4f}, {rip.max:.4f}]")

sharp = sharpness_probe(prob.ensemble, prob.y, prob.x_star, ranks, 30, seed=6)
print(f"sharpness ratio: min {sharp.min:.4f}, bound at delta=0 {sharpness_bound(0.2):.4f}")

reg = regularity_probe(prob.ensemble, prob.y, prob.x_star, 10, 0.05, seed=7)
print(f"factored regularity inner product: min {reg.min:.3e}, mean {reg.mean:.3e}")
