"""Successive approximations with a pair of contractions.

At each step we apply both maps and keep the image nearest to the current
point. For two strict contractions the run converges, never cycles, and ends
at a fixed point of one of the two maps.
"""
import numpy as np

from succapprox import Affine, Box, IterationParams, PairMap, iterate
from succapprox.iteration import banach_violations, detect_cycle, tail_lock_in

box = Box.cube(2, 0.0, 1.0)

# Two rotations-with-shrink, each with its own fixed point inside the square
f = Affine([[0.5, -0.3], [0.3, 0.5]], [0.4, 0.1])
g = Affine([[0.4, 0.2], [-0.2, 0.4]], [0.1, 0.5])
F = PairMap(f, g)
L = F.lipschitz("L2")
print(f"Lipschitz bound of the pair: {L:.4f}")

t = iterate(F, [0.05, 0.95], IterationParams(norm="L2"), box)
print(f"steps: {len(t.steps)}, converged: {t.converged}, regular: {t.regular}")
print("limit:", np.round(t.limit, 12))

# Which map won, and from when on?
lock = tail_lock_in(t, F, box)
print(f"locked onto the {lock.branch.value} map from step {lock.index} (radius {lock.radius:.3g})")

# The geometric a-priori bound holds along the whole run
print("a-priori bound violations:", len(banach_violations(t, L)))

# A near-repeat can only be the stationary tail
c = detect_cycle(t, 1e-10, L)
print(f"near-repeat at k={c.k}, p={c.p}, stationary tail: {c.fixed}")
