"""Unordered pairs {f, g} viewed as set-valued maps x -> {f(x), g(x)}.

Two metrics are provided on such pairs:

* ``pair_H``       the Hausdorff distance between {f1, f2} and {g1, g2} as
  two-element subsets of the space of maps with the uniform metric, computed
  by the min-max formula over the four component distances;
* ``pair_h_infty`` the sup over the domain of the pointwise Hausdorff
  distance between the image sets.

All operations are invariant under swapping the two components of either pair.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, PreconditionError
from .geometry import TIE_SCALE, Box, Domain, Norm, as_point, diameter, grid_sample, hausdorff_finite
from .maps import (
    Affine,
    Interval,
    MapExpr,
    _box_of,
    affine_pieces,
    d_infty,
    evaluate,
    map_from_dict,
    register_variant,
    sup_affine_norm,
)


class Pairing(str, enum.Enum):
    DIRECT = "direct"
    CROSSED = "crossed"
    BOTH = "both"
    NEITHER = "neither"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True, eq=False)
class PairMap:
    first: MapExpr
    second: MapExpr

    def __post_init__(self):
        if self.first.dim != self.second.dim:
            raise ValueError("both maps of a pair must act on the same dimension")

    @property
    def dim(self) -> int:
        return self.first.dim

    @property
    def maps(self) -> tuple:
        return (self.first, self.second)

    def swapped(self) -> "PairMap":
        return PairMap(self.second, self.first)

    def lipschitz(self, kind: Norm | str) -> float:
        """Lipschitz constant of x -> {f(x), g(x)} in the Hausdorff metric."""
        return max(self.first.lipschitz(kind), self.second.lipschitz(kind))

    def strict(self, kind: Norm | str) -> bool:
        return self.lipschitz(kind) < 1.0

    def to_dict(self) -> dict:
        return {"first": self.first.to_dict(), "second": self.second.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "PairMap":
        return cls(map_from_dict(data["first"]), map_from_dict(data["second"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PairMap":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PiecewiseSign(MapExpr):
    """Continuous two-piece affine map split by the hyperplane x[axis] = threshold.

    ``below`` applies where x[axis] <= threshold, ``above`` elsewhere.
    """

    axis: int
    threshold: float
    below: Affine
    above: Affine
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        d = self.below.dim
        if self.above.dim != d or not 0 <= self.axis < d:
            raise ValueError("PiecewiseSign pieces must share the dimension and contain the axis")
        dA = self.below.A - self.above.A
        others = np.delete(dA, self.axis, axis=1)
        jump = dA[:, self.axis] * self.threshold + (self.below.b - self.above.b)
        if np.any(np.abs(others) > 1e-12) or np.any(np.abs(jump) > 1e-12):
            raise ValueError("PiecewiseSign pieces must agree on the splitting hyperplane")

    @property
    def dim(self) -> int:
        return self.below.dim

    def __call__(self, x):
        return self.below(x) if x[self.axis] <= self.threshold else self.above(x)

    def apply_many(self, X):
        X = np.atleast_2d(X)
        mask = X[:, self.axis] <= self.threshold
        return np.where(mask[:, None], self.below.apply_many(X), self.above.apply_many(X))

    def _lipschitz(self, kind):
        # continuous across the split, so the larger piece constant is global
        return max(self.below.lipschitz(kind), self.above.lipschitz(kind))

    def affine_pieces(self, lo, hi):
        out = []
        t = self.threshold
        if lo[self.axis] <= t:
            h = hi.copy()
            h[self.axis] = min(hi[self.axis], t)
            out.append((lo, h, self.below.A, self.below.b))
        if hi[self.axis] > t:
            l = lo.copy()
            l[self.axis] = max(lo[self.axis], t)
            out.append((l, hi, self.above.A, self.above.b))
        return out

    def to_dict(self):
        return {"variant": "piecewise_sign", "axis": self.axis, "threshold": self.threshold,
                "below": self.below.to_dict(), "above": self.above.to_dict()}


register_variant("piecewise_sign", lambda d: PiecewiseSign(
    int(d["axis"]), float(d["threshold"]), map_from_dict(d["below"]), map_from_dict(d["above"])))


def evaluate_pair(F: PairMap, x, domain: Domain | None = None, kind: Norm | str = Norm.L2,
                  tol: float | None = None) -> list:
    """The image set {f(x), g(x)}; a singleton when the two images coincide within ``tol``."""
    kind = Norm.parse(kind)
    a = evaluate(F.first, x, domain)
    b = evaluate(F.second, x, domain)
    if tol is None:
        tol = TIE_SCALE * (diameter(domain, kind) if domain is not None else 1.0)
    if kind.of(a - b) <= tol:
        return [a]
    return [a, b]


def _four_distances(F: PairMap, G: PairMap, domain, kind, budget, method="auto"):
    (f1, f2), (g1, g2) = F.maps, G.maps
    return (d_infty(f1, g1, domain, kind, budget, method), d_infty(f2, g2, domain, kind, budget, method),
            d_infty(f1, g2, domain, kind, budget, method), d_infty(f2, g1, domain, kind, budget, method))


def _minmax(d11, d22, d12, d21) -> Interval:
    lower = min(max(d11.lower, d22.lower), max(d12.lower, d21.lower))
    upper = min(max(d11.upper, d22.upper), max(d12.upper, d21.upper))
    certified = all(d.certified for d in (d11, d22, d12, d21))
    return Interval(lower, upper, certified)


def pair_H(F: PairMap, G: PairMap, domain: Domain, kind: Norm | str = Norm.L2,
           budget: int = 4096, method: str = "auto") -> Interval:
    """min{max{d(f1,g1), d(f2,g2)}, max{d(f1,g2), d(f2,g1)}} with interval propagation."""
    kind = Norm.parse(kind)
    if F.dim != G.dim or F.dim != domain.dim:
        raise ValueError("pairs and domain must share the dimension")
    return _minmax(*_four_distances(F, G, domain, kind, budget, method))


def _piecewise_h_upper(F: PairMap, G: PairMap, box: Box, kind: Norm) -> float | None:
    """max over common affine pieces of the best pairing's component sup."""
    pieces = [affine_pieces(m, box.lower, box.upper) for m in (*F.maps, *G.maps)]
    if any(p is None for p in pieces):
        return None
    regions = [(box.lower, box.upper)]
    for plist in pieces:
        refined = []
        for lo, hi in regions:
            for l, h, _, _ in plist:
                nlo, nhi = np.maximum(lo, l), np.minimum(hi, h)
                if np.all(nlo <= nhi):
                    refined.append((nlo, nhi))
        regions = refined

    def on(m, lo, hi):
        mid = 0.5 * (lo + hi)
        for l, h, A, b in affine_pieces(m, lo, hi):
            if np.all(l <= mid) and np.all(mid <= h):
                return A, b
        raise AssertionError("refined region not covered by a piece")

    worst = 0.0
    f1, f2 = F.maps
    g1, g2 = G.maps
    for lo, hi in regions:
        maps = {id(m): on(m, lo, hi) for m in (f1, f2, g1, g2)}

        def sup(p, q):
            (Ap, bp), (Aq, bq) = maps[id(p)], maps[id(q)]
            return sup_affine_norm(Ap - Aq, bp - bq, lo, hi, kind)

        best = min(max(sup(f1, g1), sup(f2, g2)), max(sup(f1, g2), sup(f2, g1)))
        worst = max(worst, best)
    return worst


def pair_h_infty(F: PairMap, G: PairMap, domain: Domain, kind: Norm | str = Norm.L2,
                 budget: int = 4096) -> Interval:
    """Enclosure of sup_x h(F(x), G(x)).

    Lower end: maximum of the pointwise Hausdorff distance over a grid. Upper
    end: the smallest of (a) the grid value plus (lip F + lip G) times the
    covering radius, (b) the H upper bound, and (c) for piecewise-affine
    pairs on boxes, the exact per-piece matching bound.
    """
    kind = Norm.parse(kind)
    grid = grid_sample(domain, budget, kind)
    X = grid.points
    FA, FB = F.first.apply_many(X), F.second.apply_many(X)
    GA, GB = G.first.apply_many(X), G.second.apply_many(X)
    d = np.stack([kind.rows(FA - GA), kind.rows(FA - GB), kind.rows(FB - GA), kind.rows(FB - GB)])
    # pointwise Hausdorff distance between {FA, FB} and {GA, GB}
    pointwise = np.maximum.reduce([
        np.minimum(d[0], d[1]), np.minimum(d[2], d[3]),
        np.minimum(d[0], d[2]), np.minimum(d[1], d[3]),
    ])
    lower = float(pointwise.max())
    candidates = [(lower + (F.lipschitz(kind) + G.lipschitz(kind)) * grid.covering_radius, grid.certified)]
    H = pair_H(F, G, domain, kind, budget)
    candidates.append((H.upper, H.certified))
    box = _box_of(domain)
    if box is not None:
        pw = _piecewise_h_upper(F, G, box, kind)
        if pw is not None:
            candidates.append((pw, True))
    upper, certified = min(candidates, key=lambda c: (c[0], not c[1]))
    return Interval(lower, max(upper, lower), certified)


@dataclass(frozen=True)
class PairDistanceReport:
    H: Interval
    h_inf: Interval
    pairing: Pairing


def selection_match(F: PairMap, G: PairMap, eps: float, domain: Domain, kind: Norm | str = Norm.L2,
                    budget: int = 4096) -> Pairing:
    """Which component matching realises all uniform distances below ``eps``.

    When H(F, G) < eps is certified, at least one matching must succeed; a
    failure raises ``ConsistencyError``. When H cannot be certified below
    ``eps`` but is not excluded either, ``Pairing.INCONCLUSIVE`` is returned.
    """
    kind = Norm.parse(kind)
    if eps <= 0:
        raise ValueError("eps must be positive")
    d11, d22, d12, d21 = _four_distances(F, G, domain, kind, budget)
    direct = d11.upper < eps and d22.upper < eps
    crossed = d12.upper < eps and d21.upper < eps
    if direct and crossed:
        return Pairing.BOTH
    if direct:
        return Pairing.DIRECT
    if crossed:
        return Pairing.CROSSED
    H = _minmax(d11, d22, d12, d21)
    if H.upper < eps:
        raise ConsistencyError("H < eps certified but neither component matching is within eps")
    if H.lower >= eps:
        raise PreconditionError(f"H(F, G) >= {H.lower:.6g} is not below eps = {eps}")
    return Pairing.INCONCLUSIVE


def compare_pairs(F: PairMap, G: PairMap, domain: Domain, kind: Norm | str = Norm.L2,
                  budget: int = 4096, eps: float | None = None) -> PairDistanceReport:
    kind = Norm.parse(kind)
    H = pair_H(F, G, domain, kind, budget)
    h = pair_h_infty(F, G, domain, kind, budget)
    if eps is not None:
        try:
            pairing = selection_match(F, G, eps, domain, kind, budget)
        except PreconditionError:
            pairing = Pairing.NEITHER
    else:
        d11, d22, d12, d21 = _four_distances(F, G, domain, kind, budget)
        direct = max(d11.upper, d22.upper)
        crossed = max(d12.upper, d21.upper)
        pairing = Pairing.BOTH if direct == crossed else (Pairing.DIRECT if direct < crossed else Pairing.CROSSED)
    return PairDistanceReport(H, h, pairing)


def remark_counterexample(eps: float):
    """Two pairs on [-1, 1]^3 (Euclidean norm) that are h_infty-close but not H-close.

    F1 = {(x, 0, eps/2), (-x, 0, -eps/2)} and F2 = {f2, g2} with
    f2 = (x, 0, 0) for x <= 0, (-x, 0, 0) for x > 0, and g2 its mirror image.
    Returns ``(F1, F2, domain)``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    e1 = np.diag([1.0, 0.0, 0.0])
    zero = np.zeros(3)
    f1 = Affine(e1, [0.0, 0.0, eps / 2])
    g1 = Affine(-e1, [0.0, 0.0, -eps / 2])
    plus, minus = Affine(e1, zero), Affine(-e1, zero)
    f2 = PiecewiseSign(0, 0.0, plus, minus)
    g2 = PiecewiseSign(0, 0.0, minus, plus)
    return PairMap(f1, g1), PairMap(f2, g2), Box.cube(3, -1.0, 1.0)


def pointwise_hausdorff(F: PairMap, G: PairMap, x, kind: Norm | str = Norm.L2) -> float:
    x = as_point(x)
    return hausdorff_finite([F.first(x), F.second(x)], [G.first(x), G.second(x)], kind)
