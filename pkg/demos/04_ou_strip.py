"""Strip system driven by an Ornstein-Uhlenbeck path.  Forward attraction
to a single point holds for the Euclidean metric and fails once the x-axis
is stretched by a triple exponential; the sets A_gamma are strictly
invariant either way.

Run: python3 demos/04_ou_strip.py
"""

import numpy as np

from attractor_lab.systems.ou_strip import (OUPath, a_gamma_invariance_discrepancy,
                                            euclidean_forward_closed_form, euclidean_forward_distance,
                                            naive_sampled_discrepancy, strip_rds_eval,
                                            warped_forward_log_distance)

ou = OUPath(dt=0.01, seed=3)
print("Z(t) at t = 0, 1, 10, 100:", np.round(ou.Z(np.array([0.0, 1.0, 10.0, 100.0])), 4).tolist())

print("\nfalling point (0.5, 0.9):")
for t in (0.0, 0.5, 1.0, 2.0, 3.0):
    print(f"  t = {t}   ->", np.round(strip_rds_eval(t, ou, [[0.5, 0.9]])[0], 5).tolist())

ts = np.array([0.0, 5.0, 10.0, 20.0])
print("\nEuclidean distance of phi(t)[-2,2]x{0} to (Z(t), 0):", euclidean_forward_distance(ts, ou))
print("closed form e^{-t} c:                             ", euclidean_forward_closed_form(ts, ou))

times, logd = warped_forward_log_distance(ou, 100.0, 200.0)
i = int(np.argmax(logd))
print(f"\nwarped distance on [100, 200]: largest log value {logd[i]:.1f} at t = {times[i]:.2f}")
print("fraction of times with warped distance above 1:", float(np.mean(logd > 0)))

print("\nA_gamma invariance, exact preimages versus plain sampling:")
for k in (100, 1000, 10000):
    print(f"  {k:>5} samples   exact {a_gamma_invariance_discrepancy(1.0, ou, 2.0, k):.1e}"
          f"   sampled {naive_sampled_discrepancy(1.0, ou, 2.0, k):.1e}")
