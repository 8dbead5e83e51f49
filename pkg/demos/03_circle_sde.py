"""dX = cos X dW1 + sin X dW2 on the circle.

In discrete time the pullback images of every start point collapse onto a
random stable point.  In continuous time the backward trajectory of any
point keeps coming back to any other point, so the union of continuous
Omega-limit sets fills the circle.

Run: python3 demos/03_circle_sde.py
"""

import numpy as np

from attractor_lab.metric import TWO_PI
from attractor_lab.systems.circle import (CirclePathBundle, backward_hits, circle_pullback,
                                          continuous_omega_cloud, lyapunov_estimate,
                                          lyapunov_reversed, stable_point_estimate,
                                          synchronization_diameter)

bundle = CirclePathBundle(seed=7)
x0 = np.arange(16) * TWO_PI / 16
print("horizon   diameter of 16 pullback images")
for n in (0, 2, 5, 10, 20, 30):
    print(f"  {n:>3}     {synchronization_diameter(circle_pullback(bundle, x0, n)):.2e}")

sp = stable_point_estimate(bundle)
print(f"\nstable point estimate {sp.estimate:.4f} (dispersion {sp.dispersion:.1e})")

print(f"Lyapunov exponent, T=500:  {lyapunov_estimate(bundle, 500.0):+.3f}")
print(f"along the unstable point:  {lyapunov_reversed(bundle, 500.0):+.3f}")

hit = backward_hits(bundle, y=sp.estimate + 2.0, x=sp.estimate + 0.5, budget=1e4)
print(f"\nbackward trajectory returns near x at t = {[round(t, 2) for t in hit.epochs]}: {hit.verdict}")

cloud = continuous_omega_cloud(bundle, x=0.0, delta=0.1)
print(f"continuous Omega-limit of {{0}} covers {100 * cloud.coverage:.1f}% of the circle")
