"""A random set that is not measurable, its closed random hull, and the
minimal pullback and weak attractors of a small finite engine.

Run: python3 demos/01_finite_engine.py
"""

import numpy as np

from attractor_lab.attractor import (attracts, brute_force_attractors, minimal_pullback_attractor,
                                     minimal_weak_attractor, oracle_minimum)
from attractor_lab.cover import finite_scales
from attractor_lab.metric import FiniteSpace
from attractor_lab.randomset import FiniteUniverse, RandomSetFin, closed_random_hull
from attractor_lab.rds import make_finite_rds, omega_limit_set

# Four sample points. The shift swaps 0<->1 and 2<->3; the sigma-algebra only
# sees the blocks {0,1} and {2,3}.
u = FiniteUniverse([0.3, 0.3, 0.2, 0.2], [1, 0, 3, 2], ((0, 1), (2, 3)))
space = FiniteSpace.from_line([0.0, 1.0, 2.0, 3.0])

# A set-valued map that differs inside the first block cannot be measurable.
K = RandomSetFin.from_sections(u, 4, [{0}, {1}, {3}, set()])
H, trace = closed_random_hull(K, finite_scales(space))
print("K          ", K)
print("measurable?", K.is_measurable())
print("hull       ", H)
print("hull scales", [round(s.radius, 3) for s in trace.scales])

# Dynamics: on block {0,1} everything falls to 0 or 1 depending on the
# point; on block {2,3} the map is a rotation of the carrier.
gens = np.array([[0, 0, 1, 2], [0, 0, 1, 2], [1, 2, 3, 0], [1, 2, 3, 0]])
c = make_finite_rds(u, gens, space=space)
family = [RandomSetFin.constant(u, 4, [3]), RandomSetFin.constant(u, 4, [1, 2])]

for i, B in enumerate(family):
    print(f"Omega-limit of B{i}:", omega_limit_set(c, B))

A, cert = minimal_pullback_attractor(c, family)
W, _, _ = minimal_weak_attractor(c, family)
print("minimal pullback attractor", A, "certificate", cert.subfamily)
print("minimal weak attractor    ", W)
print("weak inside pullback:", W.subset_on(A))

# Brute force over every block-constant random set agrees.
oracle = oracle_minimum(brute_force_attractors(c, family))
print("enumeration agrees:", A.equal_on(oracle))

rep = attracts(c, family[0], A, "pullback", schedule=range(8))
print("pullback distance series of B0:", rep.series.max(axis=1).tolist(), "->", rep.verdict)
