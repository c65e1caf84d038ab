"""Stability of a regular run, and why the choice of metric matters.

Part one: perturb a regular pair by less than alpha*eps and the new run stays
within eps of the old one at every step.

Part two: two pairs can be close pointwise as sets (h_inf) while neither way
of matching their components is uniformly close.
"""
import numpy as np

from succapprox import Box, IterationParams, d_infty, iterate, pair_h_infty
from succapprox.generators import random_strict_pair
from succapprox.maps import extension_margin
from succapprox.pairs import remark_counterexample
from succapprox.perturbations import random_perturbed_pair, shadowing_trial, stability_constants

box = Box.cube(2, 0.0, 1.0)
rng = np.random.default_rng(11)
while True:
    F = random_strict_pair(box, "LINF", rng, need_margin=True)
    t = iterate(F, [0.2, 0.7], IterationParams(norm="LINF"), box)
    if t.regular:
        break

c = stability_constants(F.first, F.second, t, box, "H")
print(f"eps0 = {c.eps0:.4g}; at eps = {c.eps:.4g}: N = {c.N}, sigma = {c.sigma:.3g}, alpha = {c.alpha:.3g}")
th = extension_margin(F.first, box), extension_margin(F.second, box)
worst = 0.0
for _ in range(20):
    P = random_perturbed_pair(F.first, F.second, c.alpha * c.eps, box, "LINF", rng, *th)
    out = shadowing_trial(F.first, F.second, t, c, P, box)
    worst = max(worst, out.sup_deviation)
    assert out.ok
print(f"20 perturbed pairs: all regular, largest deviation {worst:.3g} <= eps")

F1, F2, D = remark_counterexample(0.1)
h = pair_h_infty(F1, F2, D, "L2")
(f1, g1), (f2, g2) = F1.maps, F2.maps
direct = max(d_infty(f1, f2, D, "L2").lower, d_infty(g1, g2, D, "L2").lower)
crossed = max(d_infty(f1, g2, D, "L2").lower, d_infty(g1, f2, D, "L2").lower)
print(f"h_inf <= {h.upper:.3g}, yet the matchings are {direct:.3g} and {crossed:.3g} apart")
