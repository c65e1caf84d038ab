"""Seeded random instances: affine self-maps, strict-contraction pairs, tie pairs."""
from __future__ import annotations

import numpy as np

from .errors import ConstructionError, ConvergenceError
from .geometry import Ball, Box, Domain, Norm, sample_uniform
from .maps import Affine, extension_margin, verify_self_map
from .pairs import PairMap


def _inner_point(domain: Domain, rng, shrink: float = 0.8) -> np.ndarray:
    if isinstance(domain, Box):
        return domain.center + shrink * domain.halfwidth * rng.uniform(-1, 1, domain.dim)
    inner = Ball(domain.center, shrink * domain.radius, domain.norm)
    return sample_uniform(inner, 1, rng)[0]


def random_affine_self_map(domain: Domain, kind: Norm | str, rng, lip_range=(0.1, 0.95),
                           need_margin: bool = False, max_tries: int = 1000) -> Affine:
    """Random strict contraction x -> A x + b mapping ``domain`` into itself.

    A has entries uniform in [-1, 1] rescaled so its certified operator norm
    is uniform in ``lip_range``; b puts the fixed point at a uniform point of
    the inner 80% of the domain. Candidates failing the self-map check (or,
    with ``need_margin``, lacking an extension margin above 1) are redrawn.
    """
    kind = Norm.parse(kind)
    d = domain.dim
    for _ in range(max_tries):
        A = rng.uniform(-1.0, 1.0, (d, d))
        target = rng.uniform(*lip_range)
        try:
            current = Affine(A, np.zeros(d)).lipschitz(kind)
            if current == 0:
                continue
            A = A * (target / current)
            m = Affine(A, np.zeros(d))
            if not m.lipschitz(kind) < 1.0:
                continue
        except ConvergenceError:
            continue
        xi = _inner_point(domain, rng)
        m = Affine(A, xi - A @ xi)
        if not verify_self_map(m, domain, kind, budget=2000).ok:
            continue
        if need_margin and extension_margin(m, domain) is None:
            continue
        return m
    raise ConstructionError("could not draw a random affine self-map")


def random_strict_pair(domain: Domain, kind: Norm | str, rng, lip_range=(0.1, 0.95),
                       need_margin: bool = False, min_separation: float = 1e-3) -> PairMap:
    """Two independent random affine strict contractions with distinct fixed points."""
    kind = Norm.parse(kind)
    while True:
        f = random_affine_self_map(domain, kind, rng, lip_range, need_margin)
        g = random_affine_self_map(domain, kind, rng, lip_range, need_margin)
        if kind.of(g(_fixed(f)) - _fixed(f)) > min_separation:
            return PairMap(f, g)


def _fixed(m: Affine) -> np.ndarray:
    return np.linalg.solve(np.eye(m.dim) - m.A, m.b)


def tie_pair(box: Box, kind: Norm | str, rng, lip_range=(0.1, 0.9), min_offset: float = 0.05) -> PairMap:
    """A pair {f, 2c - f} (c the box centre) that ties at x0 = c.

    f(c) - c and c - (2c - f(c)) are negatives of each other, so both branches
    are equally far from the centre. Reflection through c preserves the box,
    so the second map is a self-map whenever f is.
    """
    kind = Norm.parse(kind)
    c = box.center
    for _ in range(1000):
        f = random_affine_self_map(box, kind, rng, lip_range, need_margin=True)
        if kind.of(f(c) - c) < min_offset * box.diameter(kind):
            continue
        g = Affine(-f.A, 2.0 * c - f.b)
        if extension_margin(g, box) is None:
            continue
        return PairMap(f, g)
    raise ConstructionError("could not draw a tie pair")
