"""Nonexpansive self-maps of a domain: representation, evaluation and certificates.

A map is an immutable expression tree built from a few closed-form variants:

* ``Affine``    x -> A x + b
* ``Constant``  x -> c
* ``Averaged``  x -> (1 - t) x + t base(x)
* ``Shifted``   x -> delta y + (1 - delta) base(x)
* ``Bump``      x -> base(x) + gamma(x) (base(x) - x), gamma a cone-shaped
  bump of radius ``sigma`` centred at ``eta``
* ``FunctionMap`` wraps an arbitrary callable with a user-asserted Lipschitz
  constant; it only ever receives sampling-based certificates.

Every variant knows a certified upper bound on its Lipschitz constant for each
of the three supported norms.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ContractViolation, ConvergenceError, DomainError, PreconditionError
from .geometry import (
    TIE_SCALE,
    Ball,
    Box,
    Domain,
    Norm,
    as_point,
    diameter,
    grid_sample,
    sample_uniform,
)

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 200
_SPECTRAL_RTOL = 1e-9
_VERTEX_DIM_LIMIT = 14


class Interval(NamedTuple):
    lower: float
    upper: float
    certified: bool = True

    @property
    def exact(self) -> bool:
        return self.lower == self.upper and self.certified

    @property
    def width(self) -> float:
        return self.upper - self.lower


# -- spectral norm -------------------------------------------------------------


def _psd_certified(M: np.ndarray, s2: float) -> bool:
    """True when s2*I - M is (numerically) positive semidefinite."""
    try:
        np.linalg.cholesky(s2 * np.eye(M.shape[0]) - M)
        return True
    except np.linalg.LinAlgError:
        return False


def _scaled_up(bound: float, scale: float) -> float:
    # one extra ulp-level factor keeps the product an upper bound after rounding
    return bound * scale * (1.0 + 4e-16)


def spectral_norm_bound(A, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Certified upper bound on the largest singular value of ``A``.

    Power iteration on A^T A gives a Rayleigh-quotient lower estimate; the upper
    bound is then certified by a Cholesky factorisation of s^2 I - A^T A.
    Raises ``ConvergenceError`` (carrying a certified but loose bound) when the
    gap between the two exceeds a relative 1e-9 after ``iterations`` steps.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    scale = float(np.abs(A).max()) if A.size else 0.0
    if scale == 0.0:
        return 0.0
    if scale != 1.0:
        # work with entries of unit size so A^T A neither underflows nor overflows
        try:
            return _scaled_up(spectral_norm_bound(A / scale, iterations, seed), scale)
        except ConvergenceError as exc:
            raise ConvergenceError(str(exc), partial_bound=_scaled_up(exc.partial_bound, scale)) from None
    M = A.T @ A
    n = M.shape[0]
    fro = float(np.sqrt(np.sum(A * A)))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        lam = float(v @ w)
        v = w / nw
    lam = max(lam, float(v @ (M @ v)))
    low = math.sqrt(max(lam, 0.0))
    fallback = min(fro, math.sqrt(np.abs(A).sum(axis=0).max() * np.abs(A).sum(axis=1).max()))
    for rel in (1e-12, 1e-10, _SPECTRAL_RTOL):
        s = low * (1.0 + rel) + 1e-300
        if _psd_certified(M, s * s):
            return s
    # the Rayleigh estimate is not tight: certify the loose bound by bisection
    lo, hi = low, fallback * (1.0 + 1e-12)
    if not _psd_certified(M, hi * hi):
        hi = fro * (1.0 + 1e-9)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _psd_certified(M, mid * mid):
            hi = mid
        else:
            lo = mid
    raise ConvergenceError(
        f"power iteration did not converge in {iterations} steps "
        f"(lower {low:.6g}, certified upper {hi:.6g})",
        partial_bound=hi,
    )


def operator_norm(A, kind: Norm | str) -> float:
    """Induced operator norm of ``A`` (certified upper bound for L2)."""
    kind = Norm.parse(kind)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if kind is Norm.LINF:
        return float(np.abs(A).sum(axis=1).max())
    if kind is Norm.L1:
        return float(np.abs(A).sum(axis=0).max())
    return spectral_norm_bound(A)


# -- map expressions -------------------------------------------------------------


class MapExpr:
    """Base class of all map variants. Instances are callable and immutable."""

    dim: int

    def __call__(self, x):
        raise NotImplementedError

    def apply_many(self, X) -> np.ndarray:
        return np.array([self(x) for x in np.atleast_2d(X)])

    def lipschitz(self, kind: Norm | str) -> float:
        kind = Norm.parse(kind)
        cache = self._cache
        if kind not in cache:
            cache[kind] = self._lipschitz(kind)
        return cache[kind]

    def _lipschitz(self, kind: Norm) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Affine(MapExpr):
    A: np.ndarray
    b: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        b = as_point(self.b)
        if A.shape != (b.size, b.size):
            raise ValueError(f"Affine needs a square {b.size}x{b.size} matrix, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix entries must be finite")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls, dim: int) -> "Affine":
        return cls(np.eye(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.b.size

    def __call__(self, x):
        return self.A @ x + self.b

    def apply_many(self, X):
        return np.atleast_2d(X) @ self.A.T + self.b

    def _lipschitz(self, kind):
        return operator_norm(self.A, kind)

    def to_dict(self):
        return {"variant": "affine", "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Constant(MapExpr):
    c: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        c = as_point(self.c)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.size

    def __call__(self, x):
        return self.c.copy()

    def apply_many(self, X):
        return np.tile(self.c, (len(np.atleast_2d(X)), 1))

    def _lipschitz(self, kind):
        return 0.0

    def to_dict(self):
        return {"variant": "constant", "c": self.c.tolist()}


@dataclass(frozen=True, eq=False)
class Averaged(MapExpr):
    """(1 - t) x + t base(x); the extension margin is 1/t."""

    base: MapExpr
    t: float
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        t = float(self.t)
        if not 0.0 < t < 1.0:
            raise ValueError("Averaged.t must lie in (0, 1)")
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def theta0(self) -> float:
        return 1.0 / self.t

    def __call__(self, x):
        return (1.0 - self.t) * x + self.t * self.base(x)

    def apply_many(self, X):
        X = np.atleast_2d(X)
        return (1.0 - self.t) * X + self.t * self.base.apply_many(X)

    def _lipschitz(self, kind):
        return (1.0 - self.t) + self.t * self.base.lipschitz(kind)

    def to_dict(self):
        return {"variant": "averaged", "base": self.base.to_dict(), "t": self.t}


@dataclass(frozen=True, eq=False)
class Shifted(MapExpr):
    """delta y + (1 - delta) base(x): pulls every image towards ``y``."""

    base: MapExpr
    y: np.ndarray
    delta: float
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        delta = float(self.delta)
        if not 0.0 < delta < 1.0:
            raise ValueError("Shifted.delta must lie in (0, 1)")
        y = as_point(self.y, self.base.dim)
        y.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return self.base.dim

    def __call__(self, x):
        return self.delta * self.y + (1.0 - self.delta) * self.base(x)

    def apply_many(self, X):
        return self.delta * self.y + (1.0 - self.delta) * self.base.apply_many(X)

    def _lipschitz(self, kind):
        return (1.0 - self.delta) * self.base.lipschitz(kind)

    def to_dict(self):
        return {"variant": "shifted", "base": self.base.to_dict(), "y": self.y.tolist(),
                "delta": self.delta}


def bump_alpha(base_lip: float, eps: float, sigma: float, theta0: float) -> float:
    """min{(1 - lip)/4, eps/(2 sigma), (theta0 - 1)/(2 sigma)}."""
    return min((1.0 - base_lip) / 4.0, eps / (2.0 * sigma), (theta0 - 1.0) / (2.0 * sigma))


@dataclass(frozen=True, eq=False)
class Bump(MapExpr):
    """Localized push of ``base`` away from the point ``eta``.

    gamma(x) = max{0, sigma - |x - eta|} * min{alpha, alpha / (|base(eta) - eta| + 2 sigma)}
    and the map is base(x) + gamma(x) (base(x) - x). Outside the open ball
    B(eta, sigma) it coincides with ``base`` exactly.
    """

    base: MapExpr
    eta: np.ndarray
    sigma: float
    alpha: float
    norm: Norm = Norm.L2
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        sigma, alpha = float(self.sigma), float(self.alpha)
        if not (sigma > 0 and math.isfinite(sigma)):
            raise ValueError("Bump.sigma must be positive")
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ValueError("Bump.alpha must be positive")
        kind = Norm.parse(self.norm)
        eta = as_point(self.eta, self.base.dim)
        eta.setflags(write=False)
        if not self.base.lipschitz(kind) < 1.0:
            raise PreconditionError("Bump requires a base map certified as a strict contraction")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "norm", kind)
        object.__setattr__(self, "eta", eta)
        offset = kind.of(self.base(eta) - eta)
        object.__setattr__(self, "_slope", min(alpha, alpha / (offset + 2.0 * sigma)))
        object.__setattr__(self, "_offset", offset)

    @classmethod
    def from_budget(cls, base: MapExpr, eta, sigma: float, eps: float, theta0: float,
                    norm: Norm | str = Norm.L2) -> "Bump":
        kind = Norm.parse(norm)
        alpha = bump_alpha(base.lipschitz(kind), eps, sigma, theta0)
        return cls(base, eta, sigma, alpha, kind)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def gamma_sup(self) -> float:
        """sup of gamma, attained at eta: sigma * alpha * min{1, 1/(|base(eta)-eta| + 2 sigma)}."""
        return self.sigma * self._slope

    @property
    def base_offset(self) -> float:
        return self._offset

    def gamma(self, x) -> float:
        r = self.norm.of(np.asarray(x, dtype=float) - self.eta)
        return max(0.0, self.sigma - r) * self._slope

    def __call__(self, x):
        fx = self.base(x)
        r = self.norm.of(x - self.eta)
        if r >= self.sigma:
            return fx
        g = (self.sigma - r) * self._slope
        return fx + g * (fx - x)

    def apply_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = self.base.apply_many(X)
        r = self.norm.rows(X - self.eta)
        g = np.maximum(0.0, self.sigma - r) * self._slope
        inside = g > 0
        out = F.copy()
        out[inside] = F[inside] + g[inside, None] * (F[inside] - X[inside])
        return out

    def _lipschitz(self, kind):
        if kind is not self.norm:
            raise ContractViolation(
                f"Bump built with the {self.norm.value} norm has no certificate in {kind.value}")
        return self.base.lipschitz(kind) + 3.0 * self.alpha

    def to_dict(self):
        return {"variant": "bump", "base": self.base.to_dict(), "eta": self.eta.tolist(),
                "sigma": self.sigma, "alpha": self.alpha, "norm": self.norm.value}


@dataclass(frozen=True, eq=False)
class FunctionMap(MapExpr):
    """Arbitrary callable with a caller-asserted Lipschitz constant (not serializable)."""

    func: Callable
    lip: float
    dim: int
    name: str = "function"
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __call__(self, x):
        return np.asarray(self.func(x), dtype=float)

    def _lipschitz(self, kind):
        return float(self.lip)

    def to_dict(self):
        raise TypeError("FunctionMap wraps an arbitrary callable and cannot be serialized")


# -- serialization -------------------------------------------------------------

_DECODERS: dict[str, Callable[[dict], MapExpr]] = {}


def register_variant(name: str, decoder: Callable[[dict], MapExpr]) -> None:
    _DECODERS[name] = decoder


register_variant("affine", lambda d: Affine(d["A"], d["b"]))
register_variant("constant", lambda d: Constant(d["c"]))
register_variant("averaged", lambda d: Averaged(map_from_dict(d["base"]), d["t"]))
register_variant("shifted", lambda d: Shifted(map_from_dict(d["base"]), d["y"], d["delta"]))
register_variant("bump", lambda d: Bump(map_from_dict(d["base"]), d["eta"], d["sigma"], d["alpha"],
                                        Norm.parse(d.get("norm", "L2"))))


def map_from_dict(data: dict) -> MapExpr:
    try:
        decoder = _DECODERS[data["variant"]]
    except KeyError:
        raise ValueError(f"unknown map variant {data.get('variant')!r}") from None
    return decoder(data)


def map_to_json(m: MapExpr) -> str:
    return json.dumps(m.to_dict())


def map_from_json(text: str) -> MapExpr:
    return map_from_dict(json.loads(text))


# -- evaluation ------------------------------------------------------------------


def evaluate(m: MapExpr, x, domain: Domain | None = None, tol: float | None = None) -> np.ndarray:
    """m(x), optionally checking that x lies in ``domain``."""
    x = as_point(x, m.dim)
    if domain is not None:
        check_in_domain(domain, x, tol)
    return np.asarray(m(x), dtype=float)


def check_in_domain(domain: Domain, x, tol: float | None = None) -> None:
    kind = domain.norm if isinstance(domain, Ball) else Norm.LINF
    if tol is None:
        tol = TIE_SCALE * diameter(domain, kind)
    if x.size != domain.dim:
        raise ValueError(f"dimension mismatch: domain has dim {domain.dim}, point has {x.size}")
    gap = domain.distance_to(x, kind)
    if gap > tol:
        raise DomainError(f"point lies {gap:.3g} outside the domain")


def lipschitz_bound(m: MapExpr, kind: Norm | str = Norm.L2) -> float:
    """Certified upper bound on the Lipschitz constant of ``m``."""
    return m.lipschitz(kind)


# -- piecewise-affine reduction ----------------------------------------------------

# A piece is (lo, hi, A, b): the map equals x -> A x + b on the box [lo, hi].
Piece = tuple


def affine_pieces(m: MapExpr, lo: np.ndarray, hi: np.ndarray) -> list | None:
    """Exact piecewise-affine description of ``m`` over a box, or None."""
    piecewise = getattr(m, "affine_pieces", None)
    if piecewise is not None:
        return piecewise(lo, hi)
    if isinstance(m, Affine):
        return [(lo, hi, m.A, m.b)]
    if isinstance(m, Constant):
        return [(lo, hi, np.zeros((m.dim, m.dim)), m.c)]
    if isinstance(m, Averaged):
        inner = affine_pieces(m.base, lo, hi)
        if inner is None:
            return None
        eye = np.eye(m.dim)
        return [(l, h, (1 - m.t) * eye + m.t * A, m.t * b) for l, h, A, b in inner]
    if isinstance(m, Shifted):
        inner = affine_pieces(m.base, lo, hi)
        if inner is None:
            return None
        return [(l, h, (1 - m.delta) * A, m.delta * m.y + (1 - m.delta) * b) for l, h, A, b in inner]
    return None


def common_refinement(P: list, Q: list) -> list:
    """Pairs of pieces whose boxes overlap, restricted to the overlap."""
    out = []
    for lp, hp, Ap, bp in P:
        for lq, hq, Aq, bq in Q:
            lo = np.maximum(lp, lq)
            hi = np.minimum(hp, hq)
            if np.all(lo <= hi):
                out.append((lo, hi, (Ap, bp), (Aq, bq)))
    return out


def sup_affine_norm(C: np.ndarray, e: np.ndarray, lo: np.ndarray, hi: np.ndarray, kind: Norm) -> float:
    """max over the box [lo, hi] of |C x + e| (convex, so a vertex attains it)."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    if kind is Norm.LINF:
        return float(np.max(np.abs(C @ mid + e) + np.abs(C) @ half))
    dim = lo.size
    if dim > _VERTEX_DIM_LIMIT:
        raise ValueError("vertex enumeration limited to moderate dimensions")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))
    V = mid + signs * half
    return float(kind.rows(V @ C.T + e).max())


def image_box(A: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Exact coordinate ranges of {A x + b : x in [lo, hi]} by interval arithmetic."""
    Ap = np.maximum(A, 0.0)
    An = np.minimum(A, 0.0)
    return Ap @ lo + An @ hi + b, Ap @ hi + An @ lo + b


def _box_of(domain: Domain) -> Box | None:
    return domain if isinstance(domain, Box) else domain.as_box()


# -- self-map verification ---------------------------------------------------------


@dataclass(frozen=True)
class SelfMapCheck:
    kind: str  # "exact" | "monte_carlo" | "failed"
    samples: int = 0
    max_violation: float = 0.0

    @property
    def ok(self) -> bool:
        return self.kind != "failed"


@dataclass(frozen=True)
class MapCertificate:
    lip_bound: float
    self_map: SelfMapCheck
    theta0: float | None = None

    def __post_init__(self):
        if self.lip_bound < 0:
            raise ValueError("lip_bound must be nonnegative")
        if self.theta0 is not None and not self.theta0 > 1.0:
            raise ValueError("theta0 must exceed 1 when present")

    @property
    def strict(self) -> bool:
        return self.lip_bound < 1.0


def verify_self_map(m: MapExpr, domain: Domain, kind: Norm | str = Norm.L2, budget: int = 10_000,
                    seed: int = 0, tol: float | None = None) -> SelfMapCheck:
    """Check that ``m`` maps ``domain`` into itself.

    Piecewise-affine maps on boxes are checked exactly by interval arithmetic;
    everything else by ``budget`` uniform samples.
    """
    kind = Norm.parse(kind)
    if tol is None:
        tol = TIE_SCALE * diameter(domain, kind)
    box = _box_of(domain)
    if box is not None:
        pieces = affine_pieces(m, box.lower, box.upper)
        if pieces is not None:
            worst = 0.0
            for lo, hi, A, b in pieces:
                ilo, ihi = image_box(A, b, lo, hi)
                excess = np.maximum(box.lower - ilo, 0.0) + np.maximum(ihi - box.upper, 0.0)
                worst = max(worst, kind.of(excess))
            return SelfMapCheck("exact" if worst <= tol else "failed", 0, worst)
    rng = np.random.default_rng(seed)
    X = sample_uniform(domain, budget, rng)
    Y = m.apply_many(X)
    worst = float(domain.distances_to(Y, kind).max())
    return SelfMapCheck("monte_carlo" if worst <= tol else "failed", budget, float(worst))


def extension_margin(m: MapExpr, domain: Domain, hi: float = 64.0) -> float | None:
    """Largest theta (up to ``hi``) with theta m(x) + (1 - theta) x in D for all x.

    Returns ``None`` when no margin above 1 can be certified. Averaged maps
    report their built-in margin 1/t; piecewise-affine maps on boxes are
    handled exactly by bisection on interval images.
    """
    if isinstance(m, Averaged):
        return m.theta0
    box = _box_of(domain)
    if box is None:
        return None
    pieces = affine_pieces(m, box.lower, box.upper)
    if pieces is None:
        return None
    eye = np.eye(m.dim)

    def feasible(theta):
        for lo, hi_, A, b in pieces:
            ilo, ihi = image_box((1 - theta) * eye + theta * A, theta * b, lo, hi_)
            if np.any(ilo < box.lower) or np.any(ihi > box.upper):
                return False
        return True

    if not feasible(1.0):
        return None
    if feasible(hi):
        return hi
    lo_t, hi_t = 1.0, hi
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        if feasible(mid):
            lo_t = mid
        else:
            hi_t = mid
    return lo_t if lo_t > 1.0 else None


def certify(m: MapExpr, domain: Domain, kind: Norm | str = Norm.L2, budget: int = 10_000,
            seed: int = 0) -> MapCertificate:
    kind = Norm.parse(kind)
    return MapCertificate(
        lip_bound=m.lipschitz(kind),
        self_map=verify_self_map(m, domain, kind, budget, seed),
        theta0=extension_margin(m, domain),
    )


# -- uniform distance --------------------------------------------------------------


def _exact_sup_difference(f: MapExpr, g: MapExpr, box: Box, kind: Norm) -> float | None:
    P = affine_pieces(f, box.lower, box.upper)
    if P is None:
        return None
    Q = affine_pieces(g, box.lower, box.upper)
    if Q is None or box.dim > _VERTEX_DIM_LIMIT:
        return None
    return max(sup_affine_norm(Ap - Aq, bp - bq, lo, hi, kind)
               for lo, hi, (Ap, bp), (Aq, bq) in common_refinement(P, Q))


def _sup_displacement(m: MapExpr, domain: Domain, kind: Norm, point=None) -> float:
    """Upper bound on sup_x |m(x) - x| (or on sup_x |point - m(x)| when point is given)."""
    box = _box_of(domain)
    if box is not None:
        pieces = affine_pieces(m, box.lower, box.upper)
        if pieces is not None and box.dim <= _VERTEX_DIM_LIMIT:
            eye = np.eye(m.dim)
            if point is None:
                return max(sup_affine_norm(A - eye, b, lo, hi, kind) for lo, hi, A, b in pieces)
            return max(sup_affine_norm(-A, point - b, lo, hi, kind) for lo, hi, A, b in pieces)
    return diameter(domain, kind)


def wrapper_gap(m: MapExpr, domain: Domain, kind: Norm) -> float:
    """Certified bound on d_inf(m, m.base) for a wrapping variant."""
    if isinstance(m, Averaged):
        return (1.0 - m.t) * _sup_displacement(m.base, domain, kind)
    if isinstance(m, Shifted):
        return m.delta * _sup_displacement(m.base, domain, kind, point=m.y)
    if isinstance(m, Bump):
        if kind is not m.norm:
            return math.inf
        # |base(x) - x| <= (1 + lip) |x - eta| + |base(eta) - eta| inside the ball
        a = 1.0 + m.base.lipschitz(kind)
        c0, s = m.base_offset, m.sigma
        r_star = (a * s - c0) / (2.0 * a)
        r = min(max(r_star, 0.0), s)
        return m._slope * (s - r) * (a * r + c0)
    raise TypeError(f"{type(m).__name__} does not wrap a base map")


def _structural_upper(f: MapExpr, g: MapExpr, domain: Domain, kind: Norm, depth: int = 0) -> float:
    if f is g:
        return 0.0
    box = _box_of(domain)
    if box is not None:
        exact = _exact_sup_difference(f, g, box, kind)
        if exact is not None:
            return exact
    if depth > 32:
        return math.inf
    best = math.inf
    for a, b in ((f, g), (g, f)):
        if isinstance(a, (Averaged, Shifted, Bump)):
            gap = wrapper_gap(a, domain, kind)
            if math.isfinite(gap):
                best = min(best, gap + _structural_upper(a.base, b, domain, kind, depth + 1))
    return best


def _special_points(m: MapExpr) -> list:
    pts = []
    while True:
        if isinstance(m, Bump):
            pts.append(m.eta)
        base = getattr(m, "base", None)
        if base is None:
            return pts
        m = base


def d_infty(f: MapExpr, g: MapExpr, domain: Domain, kind: Norm | str = Norm.L2,
            budget: int = 4096, method: str = "auto") -> Interval:
    """Enclosure of sup_{x in D} |f(x) - g(x)|.

    Exact for piecewise-affine maps on boxes (maximum of a convex function at
    box vertices). Otherwise the lower end is the maximum over a grid of at
    most ``budget`` points and the upper end the smaller of
    ``lower + (lip f + lip g) * covering_radius`` and a structural bound that
    follows wrapper variants back to a common base.
    """
    kind = Norm.parse(kind)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if method not in ("auto", "sample"):
        raise ValueError("method must be 'auto' or 'sample'")
    if f is g:
        return Interval(0.0, 0.0)
    box = _box_of(domain)
    if method == "auto" and box is not None:
        exact = _exact_sup_difference(f, g, box, kind)
        if exact is not None:
            return Interval(exact, exact)
    grid = grid_sample(domain, budget, kind)
    X = grid.points
    extra = [p for p in _special_points(f) + _special_points(g)]
    if extra:
        X = np.vstack([X] + [np.atleast_2d(p) for p in extra])
    lower = float(kind.rows(f.apply_many(X) - g.apply_many(X)).max())
    sampled_upper = lower + (f.lipschitz(kind) + g.lipschitz(kind)) * grid.covering_radius
    structural = _structural_upper(f, g, domain, kind) if method == "auto" else math.inf
    if structural <= sampled_upper:
        return Interval(lower, max(structural, lower), True)
    return Interval(lower, sampled_upper, grid.certified)


# -- single-map fixed points -------------------------------------------------------


def fixed_point(m: MapExpr, domain: Domain, kind: Norm | str = Norm.L2, tol: float = 1e-12,
                max_iter: int = 1_000_000, x0=None) -> np.ndarray:
    """Banach iteration from the domain centre with the a-priori stopping rule.

    Stops once |x_{n+1} - x_n| * L / (1 - L) <= tol, which bounds the distance
    of x_{n+1} to the true fixed point by ``tol``.
    """
    kind = Norm.parse(kind)
    L = m.lipschitz(kind)
    if not L < 1.0:
        raise ContractViolation(f"fixed_point needs a strict contraction, got lip bound {L}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = domain.center.copy() if x0 is None else as_point(x0, m.dim)
    factor = L / (1.0 - L)
    for _ in range(max_iter):
        y = m(x)
        step = kind.of(y - x)
        if step * factor <= tol or step == 0.0:
            return y
        x = y
    raise ConvergenceError(f"Banach iteration did not reach tol={tol} in {max_iter} steps")
