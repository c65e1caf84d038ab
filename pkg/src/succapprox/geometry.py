"""Norms, domains, two-point metric projections and finite Hausdorff distances.

Points are plain 1-D ``numpy`` float arrays. Domains are bounded closed convex
subsets of R^d: axis-aligned boxes and norm balls.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

TIE_SCALE = 1e-12


class Norm(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "Linf"

    @classmethod
    def parse(cls, value) -> "Norm":
        if isinstance(value, Norm):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown norm {value!r}; expected one of L1, L2, Linf")

    def of(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self is Norm.L1:
            return float(np.sum(np.abs(v)))
        if self is Norm.L2:
            # hypot rescales internally, so tiny or huge entries neither underflow nor overflow
            return math.hypot(*v.ravel())
        return float(np.max(np.abs(v))) if v.size else 0.0

    def rows(self, V) -> np.ndarray:
        """Norm of every row of a 2-D array."""
        V = np.asarray(V, dtype=float)
        if self is Norm.L1:
            return np.sum(np.abs(V), axis=-1)
        if self is Norm.L2:
            return np.sqrt(np.sum(V * V, axis=-1))
        return np.max(np.abs(V), axis=-1)


def as_point(p, dim: int | None = None) -> np.ndarray:
    """Validate and convert ``p`` to a finite 1-D float array."""
    x = np.array(p, dtype=float).reshape(-1) if np.ndim(p) == 0 else np.array(p, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"a point must be a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    if dim is not None and x.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {x.size}")
    return x


def norm(p, kind: Norm | str = Norm.L2) -> float:
    return Norm.parse(kind).of(as_point(p))


def dist(x, y, kind: Norm | str = Norm.L2) -> float:
    return Norm.parse(kind).of(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))


def norm_ratio(source: Norm, target: Norm, dim: int) -> float:
    """sup{ |u|_target : |u|_source <= 1 } in R^dim (sharp equivalence constant)."""
    order = {Norm.L1: 1.0, Norm.L2: 2.0, Norm.LINF: math.inf}
    p, q = order[source], order[target]
    if q >= p:
        return 1.0
    # q < p: the extremal vector is the all-ones direction
    inv = lambda r: 0.0 if math.isinf(r) else 1.0 / r
    return float(dim ** (inv(q) - inv(p)))


# -- domains -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper, lo.size)
        if not np.all(lo < hi):
            raise ValueError("Box requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, lo: float = 0.0, hi: float = 1.0) -> "Box":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def halfwidth(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def as_box(self) -> "Box":
        return self

    def distance_to(self, x, kind: Norm) -> float:
        x = np.asarray(x, dtype=float)
        excess = np.maximum(self.lower - x, 0.0) + np.maximum(x - self.upper, 0.0)
        return kind.of(excess)

    def distances_to(self, X, kind: Norm) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return kind.rows(np.maximum(self.lower - X, 0.0) + np.maximum(X - self.upper, 0.0))

    def diameter(self, kind: Norm) -> float:
        return kind.of(self.upper - self.lower)

    def project(self, X) -> np.ndarray:
        # coordinatewise clipping is nonexpansive in every l_p norm
        return np.clip(X, self.lower, self.upper)

    def to_dict(self) -> dict:
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float
    norm: Norm = Norm.L2

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "norm", Norm.parse(self.norm))
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise ValueError("Ball radius must be positive and finite")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def as_box(self) -> Box | None:
        if self.norm is Norm.LINF:
            return Box(self.center - self.radius, self.center + self.radius)
        return None

    def bounding_box(self) -> Box:
        return Box(self.center - self.radius, self.center + self.radius)

    def distance_to(self, x, kind: Norm) -> float:
        v = np.asarray(x, dtype=float) - self.center
        r = self.norm.of(v)
        if r <= self.radius:
            return 0.0
        # radial projection; exact when kind matches the ball's norm
        return kind.of(v * (1.0 - self.radius / r))

    def distances_to(self, X, kind: Norm) -> np.ndarray:
        V = np.atleast_2d(np.asarray(X, dtype=float)) - self.center
        r = self.norm.rows(V)
        shrink = np.where(r > self.radius, 1.0 - self.radius / np.where(r > 0, r, 1.0), 0.0)
        return kind.rows(V * shrink[:, None])

    def diameter(self, kind: Norm) -> float:
        return 2.0 * self.radius * norm_ratio(self.norm, kind, self.dim)

    def project(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = X - self.center
        r = self.norm.rows(V)
        scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return self.center + V * scale[:, None]

    def to_dict(self) -> dict:
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius,
                "norm": self.norm.value}


Domain = Box | Ball


def domain_from_dict(data: dict) -> Domain:
    kind = data.get("type", "box").lower()
    if kind == "box":
        return Box(data["lower"], data["upper"])
    if kind == "ball":
        return Ball(data["center"], data["radius"], Norm.parse(data.get("norm", "L2")))
    raise ValueError(f"unknown domain type {kind!r}")


def domain_center(d: Domain) -> np.ndarray:
    return d.center.copy()


def contains(d: Domain, p, tol: float = 0.0, kind: Norm | str | None = None) -> bool:
    """True iff ``p`` is within ``tol`` of the closed domain.

    The distance is measured in ``kind`` (defaults to the ball's own norm, or
    Linf for boxes).
    """
    x = as_point(p)
    if x.size != d.dim:
        raise ValueError(f"dimension mismatch: domain has dim {d.dim}, point has {x.size}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if kind is None:
        kind = d.norm if isinstance(d, Ball) else Norm.LINF
    return d.distance_to(x, Norm.parse(kind)) <= tol


def diameter(d: Domain, kind: Norm | str = Norm.L2) -> float:
    """sup |x - y| over the domain.

    For balls measured in a different norm the sharp equivalence constant is
    used, so the value is exact rather than an enclosure.
    """
    return d.diameter(Norm.parse(kind))


def default_tie_tol(d: Domain | None, kind: Norm | str = Norm.L2) -> float:
    if d is None:
        return TIE_SCALE
    return TIE_SCALE * diameter(d, kind)


# -- sampling ----------------------------------------------------------------


def sample_uniform(d: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over the domain (rejection from the bounding box for balls)."""
    if isinstance(d, Box):
        return d.lower + (d.upper - d.lower) * rng.random((n, d.dim))
    box = d.bounding_box()
    out = []
    count = 0
    while count < n:
        cand = box.lower + (box.upper - box.lower) * rng.random((max(2 * (n - count), 16), d.dim))
        keep = cand[d.norm.rows(cand - d.center) <= d.radius]
        out.append(keep)
        count += len(keep)
    return np.concatenate(out)[:n]


class GridSample(NamedTuple):
    points: np.ndarray
    covering_radius: float
    certified: bool


def grid_sample(d: Domain, budget: int, kind: Norm) -> GridSample:
    """Regular grid with at most ``budget`` points plus its covering radius.

    Every point of a box lies within half a grid cell of a grid node, so the
    covering radius is certified. For balls the grid of the bounding box is
    mapped into the ball; the radius is certified only when that map is
    nonexpansive in ``kind``.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    box = d.as_box() if isinstance(d, Ball) else d
    target = box if box is not None else d.bounding_box()
    dim = target.dim
    per_axis = max(2, int(math.floor(budget ** (1.0 / dim) + 1e-9)))
    if per_axis ** dim > budget and budget >= 2 ** dim:
        per_axis -= 1
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(target.lower, target.upper)]
    pts = np.array(list(itertools.product(*axes)), dtype=float)
    half_cell = (target.upper - target.lower) / (2.0 * (per_axis - 1))
    cover = kind.of(half_cell)
    if box is not None:
        return GridSample(pts, cover, True)
    pts = d.project(pts)
    certified = d.norm is Norm.L2 and kind is Norm.L2
    return GridSample(pts, cover, certified)


# -- projections and Hausdorff distance --------------------------------------


class ProjectionResult(NamedTuple):
    selected: tuple
    gap: float
    tie: bool
    nearest: int  # 0 for a, 1 for b; at a tie, the index of the smaller raw distance


def metric_projection_two(x, a, b, kind: Norm | str = Norm.L2, tie_tol: float = 0.0) -> ProjectionResult:
    """Nearest point(s) of the two-point set {a, b} to x."""
    kind = Norm.parse(kind)
    x = as_point(x)
    a = as_point(a, x.size)
    b = as_point(b, x.size)
    if tie_tol < 0:
        raise ValueError("tie_tol must be nonnegative")
    da = kind.of(x - a)
    db = kind.of(x - b)
    gap = abs(da - db)
    nearest = 0 if da <= db else 1
    if gap <= tie_tol:
        return ProjectionResult((a, b), gap, True, nearest)
    return ProjectionResult(((a, b)[nearest],), gap, False, nearest)


def _as_set(S) -> np.ndarray:
    arr = np.asarray(S, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size and not isinstance(S, np.ndarray) else arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("point sets must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def hausdorff_finite(S: Sequence, T: Sequence, kind: Norm | str = Norm.L2) -> float:
    """Hausdorff distance between two finite point sets.

    ``S`` and ``T`` are sequences of points (or 2-D arrays with one point per
    row). A 1-D list of scalars is read as a set of points on the real line.
    """
    kind = Norm.parse(kind)
    A = _as_set(S)
    B = _as_set(T)
    if A.shape[1] != B.shape[1]:
        raise ValueError("point sets live in different dimensions")
    D = kind.rows(A[:, None, :] - B[None, :, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
