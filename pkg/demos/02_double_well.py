"""x' = x - x^3: the minimal point attractor is the three equilibria, the
attractor of bounded sets is the whole interval [-1, 1].

Run: python3 demos/02_double_well.py
"""

import numpy as np

from attractor_lab.systems.doublewell import (doublewell_attractor_suite, doublewell_flow,
                                              interval_set_attractor)

for x in (-2.0, -0.3, 0.0, 0.4, 2.0):
    print(f"x0 = {x:+.1f}   x(10) = {doublewell_flow(10.0, x):+.8f}")

print("\nimages of [-3, 3]:")
for T, (lo, hi) in zip((1, 2, 5, 10, 20), interval_set_attractor(3.0, [1, 2, 5, 10, 20])):
    print(f"  T = {T:>2}   [{lo:+.6f}, {hi:+.6f}]")

rep = doublewell_attractor_suite(h=0.01, R=3.0, horizon=50.0)
print("\npoint attractor on the grid:", rep.point_attractor)
print("set attractor on the grid:   ", rep.set_attractor_grid[0], "...", rep.set_attractor_grid[-1],
      f"({len(rep.set_attractor_grid)} points)")
for name, v in rep.candidates.items():
    print(f"non-minimal candidate {name}: {v}")
print("all checks:", rep.passed)
print("largest cocycle residual:", np.format_float_scientific(rep.cocycle_max_residual, 2))
