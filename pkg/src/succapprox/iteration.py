"""Successive approximations x_{n+1} in P_{F(x_n)}(x_n) for a pair F = {f, g}.

At every step the next iterate is the image nearer to the current point.
``iterate`` records the projection gap at every point so regularity (no ties
anywhere) can be read off the report, and the diagnostics below check the
quantitative statements that hold for pairs of strict contractions.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConsistencyError, ContractViolation, PreconditionError, TieError
from .geometry import Domain, Norm, as_point, default_tie_tol
from .maps import check_in_domain, fixed_point
from .pairs import PairMap


class BranchRule(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"
    FAIL = "fail"

    @classmethod
    def parse(cls, value) -> "BranchRule":
        if isinstance(value, BranchRule):
            return value
        aliases = {"firstlisted": "first", "secondlisted": "second"}
        key = str(value).strip().lower().replace("_", "")
        return cls(aliases.get(key, key))


class Choice(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"
    TIE = "tie"


@dataclass(frozen=True)
class IterationParams:
    max_steps: int = 10_000
    tie_tol: float | None = None  # None: 1e-12 * diam(D)
    conv_tol: float = 1e-12
    branch_rule: BranchRule = BranchRule.FIRST
    norm: Norm = Norm.L2

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be positive")
        if self.tie_tol is not None and self.tie_tol < 0:
            raise ValueError("tie_tol must be nonnegative")
        object.__setattr__(self, "branch_rule", BranchRule.parse(self.branch_rule))
        object.__setattr__(self, "norm", Norm.parse(self.norm))

    def resolved_tie_tol(self, domain: Domain | None) -> float:
        return self.tie_tol if self.tie_tol is not None else default_tie_tol(domain, self.norm)

    def to_dict(self) -> dict:
        return {"max_steps": self.max_steps, "tie_tol": self.tie_tol, "conv_tol": self.conv_tol,
                "branch_rule": self.branch_rule.value, "norm": self.norm.value}

    @classmethod
    def from_dict(cls, data: dict) -> "IterationParams":
        return cls(**{k: v for k, v in data.items() if k in
                      ("max_steps", "tie_tol", "conv_tol", "branch_rule", "norm")})


@dataclass(frozen=True)
class StepRecord:
    """Projection data at the point x_n.

    ``chosen`` is TIE when the gap is within tolerance; ``taken`` is always
    the branch that produced x_{n+1}. ``step_len`` is |x_{n+1} - x_n|, which
    equals d(x_n, F(x_n)); for the final record of a converged run it is the
    residual of the step that was not taken.
    """

    index: int
    point: np.ndarray
    chosen: Choice
    taken: Choice
    gap: float
    step_len: float


@dataclass(frozen=True)
class LockIn:
    branch: Choice
    index: int
    center: np.ndarray
    radius: float
    tie_indices: tuple


@dataclass(frozen=True)
class Cycle:
    k: int
    p: int
    fixed: bool  # tail stays put, as required for strict contractions


@dataclass(frozen=True)
class TrajectoryReport:
    steps: list
    converged: bool
    limit: np.ndarray | None
    regular: bool
    params: IterationParams
    x0: np.ndarray
    tie_tol: float
    lock_in: LockIn | None = None
    cycle: Cycle | None = None

    @property
    def points(self) -> np.ndarray:
        return np.array([s.point for s in self.steps])

    @property
    def norm(self) -> Norm:
        return self.params.norm

    @property
    def tie_indices(self) -> list:
        return [s.index for s in self.steps if s.chosen is Choice.TIE]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([s.gap for s in self.steps])

    @property
    def step_lengths(self) -> np.ndarray:
        return np.array([s.step_len for s in self.steps])

    def with_diagnostics(self, **kw) -> "TrajectoryReport":
        return replace(self, **kw)


def iterate(F: PairMap, x0, params: IterationParams = IterationParams(),
            domain: Domain | None = None) -> TrajectoryReport:
    """Run successive approximations from ``x0``.

    Stops as soon as d(x_n, F(x_n)) <= conv_tol (converged, limit x_n) or
    after ``max_steps`` transitions.
    """
    kind = params.norm
    x = as_point(x0, F.dim)
    if domain is not None:
        check_in_domain(domain, x)
    tie_tol = params.resolved_tie_tol(domain)
    rule = params.branch_rule
    f, g = F.first, F.second
    steps = []
    regular = True
    converged = False
    for n in range(params.max_steps + 1):
        a, b = f(x), g(x)
        da, db = kind.of(a - x), kind.of(b - x)
        gap = abs(da - db)
        if kind.of(a - b) <= tie_tol:
            # coincident images form a one-point set, so the projection is unique
            chosen = taken = Choice.FIRST
        elif gap <= tie_tol:
            chosen = Choice.TIE
            if rule is BranchRule.FAIL:
                raise TieError(f"metric projection is not unique at step {n}", n)
            taken = Choice.FIRST if rule is BranchRule.FIRST else Choice.SECOND
            regular = False
        else:
            chosen = taken = Choice.FIRST if da < db else Choice.SECOND
        nxt, step = (a, da) if taken is Choice.FIRST else (b, db)
        steps.append(StepRecord(n, x, chosen, taken, gap, step))
        if min(da, db) <= params.conv_tol:
            converged = True
            break
        if n == params.max_steps:
            break
        x = nxt
    return TrajectoryReport(steps=steps, converged=converged, limit=x.copy() if converged else None,
                            regular=regular, params=params, x0=as_point(x0), tie_tol=tie_tol)


# -- diagnostics -------------------------------------------------------------------

_SCIPY_METRIC = {Norm.L1: "cityblock", Norm.L2: "euclidean", Norm.LINF: "chebyshev"}


def pairwise_distances(points: np.ndarray, kind: Norm) -> np.ndarray:
    from scipy.spatial.distance import cdist

    return cdist(points, points, metric=_SCIPY_METRIC[kind])


def banach_violations(t: TrajectoryReport, L: float, slack: float = 1e-9,
                      step_slack: float = 1e-10) -> list:
    """All (kind, n, k, excess) violating the a-priori or stepwise bounds.

    a-priori: |x_{n+k} - x_n| <= |x_1 - x_0| L^n / (1 - L) + slack
    stepwise: |x_{n+1} - x_n| <= L |x_n - x_{n-1}| + step_slack
    """
    if not 0.0 <= L < 1.0:
        raise ContractViolation(f"L must lie in [0, 1), got {L}")
    P = t.points
    kind = t.norm
    out = []
    if len(P) < 2:
        return out
    first = kind.of(P[1] - P[0])
    D = pairwise_distances(P, kind)
    m = len(P)
    with np.errstate(under="ignore"):
        envelope = first * L ** np.arange(m) / (1.0 - L)
    upper = np.triu(D, k=1)  # upper[n, n+k]
    worst = upper.max(axis=1)
    for n in np.nonzero(worst > envelope + slack)[0]:
        k = int(np.argmax(upper[n])) - n
        out.append(("a_priori", int(n), k, float(worst[n] - envelope[n])))
    steps = np.array([kind.of(P[i + 1] - P[i]) for i in range(m - 1)])
    for n in range(1, len(steps)):
        excess = steps[n] - L * steps[n - 1]
        if excess > step_slack:
            out.append(("stepwise", n, 1, float(excess)))
    return out


def check_banach_bound(t: TrajectoryReport, L: float, slack: float = 1e-9,
                       step_slack: float = 1e-10) -> bool:
    """True iff the trajectory obeys the geometric a-priori and stepwise bounds for ``L``."""
    return not banach_violations(t, L, slack, step_slack)


def detect_cycle(t: TrajectoryReport, tol: float = 0.0, L: float | None = None) -> Cycle | None:
    """Shortest near-repeat: the smallest p >= 1, then the smallest k, with |x_{k+p} - x_k| <= tol.

    Points are bucketed on a grid of cell size ``tol`` (exact keys when tol is
    0) so only neighbouring cells are compared. For a strict contraction an
    exact repeat forces a fixed point; with a tolerance, a repeat at (k, p)
    forces d(x_k, F(x_k)) <= (1 + L) tol / (1 - L^p). ``fixed`` reports
    whether every later step stays below that radius (below ``tol`` itself
    when ``L`` is not given).
    """
    P = t.points
    kind = t.norm
    buckets: dict = {}
    if tol == 0:
        keys = [tuple(p) for p in P]
        neighbours = lambda key: (key,)
    else:
        keys = [tuple(np.floor(p / tol).astype(np.int64)) for p in P]
        offsets = list(itertools.product((-1, 0, 1), repeat=P.shape[1]))
        neighbours = lambda key: (tuple(a + o for a, o in zip(key, off)) for off in offsets)
    for i, key in enumerate(keys):
        buckets.setdefault(key, []).append(i)
    best = None
    for k, key in enumerate(keys):
        for nb in neighbours(key):
            for j in buckets.get(nb, ()):
                if j > k and (best is None or (j - k, k) < best) and kind.of(P[j] - P[k]) <= tol:
                    best = (j - k, k)
    # a converged run stops before recording its repeat; the last step length is that gap
    last = t.steps[-1]
    if t.converged and last.step_len <= tol and (best is None or (1, last.index) < best):
        best = (1, last.index)
    if best is None:
        return None
    p, k = best
    if L is None:
        radius = tol
    else:
        radius = (1.0 + L) * tol / (1.0 - L ** p) if L < 1 else math.inf
    later = t.step_lengths[k:]
    return Cycle(k, p, bool(np.all(later <= radius + 1e-15)))


def distinct_fixed_points(F: PairMap, domain: Domain, kind: Norm, tol: float = 1e-13):
    """Fixed points (xi, eta) of the two components; raises if they coincide."""
    if not F.strict(kind):
        raise PreconditionError("both components must be strict contractions")
    xi = fixed_point(F.first, domain, kind, tol)
    eta = fixed_point(F.second, domain, kind, tol)
    # the fixed points are distinct iff xi is moved by the second map
    if kind.of(F.second(xi) - xi) <= 1e3 * tol + 1e-12 * (1.0 + kind.of(xi)):
        raise PreconditionError("the two components share their fixed point")
    return xi, eta


def lock_in_radius(F: PairMap, branch: Choice, fixed: np.ndarray, kind: Norm) -> float:
    """Certified radius r0 around the fixed point of ``branch`` inside which it wins.

    For |x - z| < r: |own(x) - x| <= (1 + L_own) r and
    |other(x) - x| >= |other(z) - z| - (1 + L_other) r.
    """
    own, other = (F.first, F.second) if branch is Choice.FIRST else (F.second, F.first)
    separation = kind.of(other(fixed) - fixed)
    return separation / (2.0 + own.lipschitz(kind) + other.lipschitz(kind))


def tail_lock_in(t: TrajectoryReport, F: PairMap, domain: Domain, radius: float | None = None) -> LockIn:
    """First index after which the trajectory stays near one fixed point choosing one branch.

    The ball radius defaults to half of the certified ``lock_in_radius``. Any
    tie or branch switch after the returned index raises ``ConsistencyError``.
    """
    kind = t.norm
    xi, eta = distinct_fixed_points(F, domain, kind)
    P = t.points
    last = P[-1]
    branch = Choice.FIRST if kind.of(last - xi) <= kind.of(last - eta) else Choice.SECOND
    z = xi if branch is Choice.FIRST else eta
    r0 = lock_in_radius(F, branch, z, kind)
    r = 0.5 * r0 if radius is None else float(radius)
    if not 0 < r < r0:
        raise PreconditionError(f"radius must lie in (0, {r0:.6g})")
    inside = kind.rows(P - z) <= r
    if not inside[-1]:
        raise PreconditionError("trajectory has not entered the lock-in ball; iterate longer")
    N = int(np.argmax(inside))
    if not np.all(inside[N:]):
        raise ConsistencyError("trajectory left the lock-in ball after entering it")
    for s in t.steps[N:]:
        if s.chosen is not branch:
            raise ConsistencyError(f"step {s.index} after lock-in chose {s.chosen.value}")
    ties = tuple(i for i in t.tie_indices if i < N)
    return LockIn(branch, N, z, r, ties)


# -- CSV ---------------------------------------------------------------------------


def trajectory_csv(t: TrajectoryReport) -> str:
    """index, x0..x{d-1}, chosen, gap, step_len with 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    dim = t.steps[0].point.size
    writer.writerow(["index", *[f"x{i}" for i in range(dim)], "chosen", "gap", "step_len"])
    for s in t.steps:
        writer.writerow([s.index, *[f"{v:.17g}" for v in s.point], s.chosen.value,
                         f"{s.gap:.17g}", f"{s.step_len:.17g}"])
    return buf.getvalue()


def read_trajectory_csv(text: str) -> list:
    """Parse a trajectory CSV back into (index, point, chosen, gap, step_len) tuples."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    dim = len(header) - 4
    out = []
    for row in body:
        out.append((int(row[0]), np.array([float(v) for v in row[1:1 + dim]]),
                    Choice(row[1 + dim]), float(row[2 + dim]), float(row[3 + dim])))
    return out
