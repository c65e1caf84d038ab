"""Constructive perturbations of maps and pairs, and the shadowing constants.

* ``shift_toward``      strict contraction close to f with a different fixed point
* ``average_identity``  (1 - t) x + t f(x), which admits extension margin 1/t
* ``bump_push``         localized push of f(eta) away from eta
* ``regularize_pair``   nearby pair whose projections along a given trajectory
  are all unique while the trajectory itself is unchanged
* ``stability_constants`` / ``shadowing_trial``  the radii (eps0, alpha) under
  which every alpha*eps-close pair produces a regular eps-shadowing trajectory
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ConstructionError, ContractViolation, PreconditionError
from .errors import ConvergenceError
from .geometry import Box, Domain, Norm, diameter
from .iteration import Choice, IterationParams, TrajectoryReport, iterate, tail_lock_in
from .maps import (
    Affine,
    Averaged,
    Bump,
    Interval,
    MapExpr,
    Shifted,
    d_infty,
    extension_margin,
    fixed_point,
    verify_self_map,
)
from .pairs import PairMap, pair_H, pair_h_infty


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# -- single-map perturbations --------------------------------------------------


def shift_toward(f: MapExpr, eps: float, domain: Domain, kind: Norm | str = Norm.L2,
                 rng_seed=0, delta: float | None = None) -> Shifted:
    """x -> delta y + (1 - delta) f(x) with 0 < |xi - y| < eps and delta < eps / diam D.

    ``y`` sits on the segment from the fixed point xi towards the domain centre
    (a random direction when xi is the centre), so it stays in D by convexity.
    """
    kind = Norm.parse(kind)
    if eps <= 0:
        raise ValueError("eps must be positive")
    lip = f.lipschitz(kind)
    if lip == 0.0:
        raise PreconditionError("shift_toward needs a non-constant map")
    xi = fixed_point(f, domain, kind)
    center = domain.center
    diam = diameter(domain, kind)
    towards = center - xi
    reach = kind.of(towards)
    if reach > 1e-9 * diam:
        y = xi + towards * (min(eps, reach) / (2.0 * reach))
    else:
        u = _rng(rng_seed).standard_normal(xi.size)
        u /= kind.of(u)
        # longest admissible step along u inside a box-shaped neighbourhood of the centre
        inner = domain if isinstance(domain, Box) else domain.bounding_box()
        room = np.min(np.where(np.abs(u) > 0, inner.halfwidth / np.maximum(np.abs(u), 1e-300), np.inf))
        if not isinstance(domain, Box):
            room = min(room, domain.radius / max(domain.norm.of(u), 1e-300))
        y = xi + u * min(eps / 2.0, room / 2.0)
    if delta is None:
        delta = min(0.5, eps / (2.0 * diam))
    if not (0.0 < delta < 1.0 and delta < eps / diam):
        raise ValueError("delta must lie in (0, 1) and below eps / diam D")
    sep = kind.of(xi - y)
    if not 0.0 < sep < eps:
        raise ConstructionError("could not place the attraction point within eps of the fixed point")
    return Shifted(f, y, delta)


def average_identity(f: MapExpr, eps: float, domain: Domain, kind: Norm | str = Norm.L2,
                     t: float | None = None) -> tuple[Averaged, float]:
    """Return (x -> (1 - t) x + t f(x), 1/t) with (1 - t) diam D < eps."""
    kind = Norm.parse(kind)
    if eps <= 0:
        raise ValueError("eps must be positive")
    diam = diameter(domain, kind)
    if t is None:
        t = max(0.5, 1.0 - eps / (2.0 * diam))
    if not (0.0 < t < 1.0):
        raise ValueError("t must lie in (0, 1)")
    if not (1.0 - t) * diam < eps:
        raise ValueError(f"(1 - t) diam D = {(1 - t) * diam:.6g} is not below eps = {eps}")
    phi = Averaged(f, t)
    return phi, phi.theta0


def bump_push(f: MapExpr, eta, sigma: float, eps: float, theta0: float | None,
              kind: Norm | str = Norm.L2) -> Bump:
    """Bump with alpha = min{(1 - lip f)/4, eps/(2 sigma), (theta0 - 1)/(2 sigma)}.

    The result equals f off B(eta, sigma), is within sigma*alpha of f, has
    Lipschitz bound lip f + 3 alpha <= 1 - alpha, and moves f(eta) to
    f(eta) + c (f(eta) - eta) with c = sup gamma > 0.
    """
    kind = Norm.parse(kind)
    if theta0 is None:
        raise PreconditionError("bump_push needs an extension margin theta0 > 1")
    if not theta0 > 1.0:
        raise PreconditionError("theta0 must exceed 1")
    if not f.lipschitz(kind) < 1.0:
        raise ContractViolation("bump_push needs a strict contraction")
    if sigma <= 0 or eps <= 0:
        raise ValueError("sigma and eps must be positive")
    return Bump.from_budget(f, eta, sigma, eps, theta0, kind)


def fixed_point_distance_bound(f: MapExpr, g: MapExpr, eps: float, kind: Norm | str = Norm.L2) -> float:
    """min{eps/(1 - lip f), eps/(1 - lip g)}: fixed points of eps-close contractions are this close."""
    kind = Norm.parse(kind)
    lf, lg = f.lipschitz(kind), g.lipschitz(kind)
    if not (lf < 1.0 and lg < 1.0):
        raise ContractViolation("both maps must be strict contractions")
    return min(eps / (1.0 - lf), eps / (1.0 - lg))


# -- regularization --------------------------------------------------------------


@dataclass(frozen=True)
class RegularizationResult:
    phi: MapExpr
    psi: MapExpr
    touched_indices: list
    margin: float
    H: Interval
    lock_in_index: int
    sigma: float | None
    radius: float

    @property
    def pair(self) -> PairMap:
        return PairMap(self.phi, self.psi)

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.to_dict(), "psi": self.psi.to_dict(),
            "touched_indices": list(self.touched_indices), "margin": self.margin,
            "H": {"lower": self.H.lower, "upper": self.H.upper, "certified": self.H.certified},
            "lock_in_index": self.lock_in_index, "sigma": self.sigma, "radius": self.radius,
        }


def _theta(m: MapExpr, domain: Domain, given: float | None) -> float:
    theta = given if given is not None else extension_margin(m, domain)
    if theta is None or not theta > 1.0:
        raise PreconditionError(
            "no extension margin theta0 > 1 is known; pre-process the map with average_identity")
    return theta


def regularize_pair(f: MapExpr, g: MapExpr, traj: TrajectoryReport, eps: float, domain: Domain,
                    theta0_f: float | None = None, theta0_g: float | None = None,
                    budget: int = 4096) -> RegularizationResult:
    """Nearby pair {phi, psi} whose projections along ``traj`` are all unique.

    At every tie x_i before lock-in, the branch that was *not* taken is pushed
    away from x_i by a bump supported in B(x_i, sigma). The supports are
    pairwise disjoint and avoid the lock-in ball, so every recorded point is
    reproduced exactly.
    """
    kind = traj.norm
    if eps <= 0:
        raise ValueError("eps must be positive")
    F = PairMap(f, g)
    lock = tail_lock_in(traj, F, domain)
    N = lock.index
    P = traj.points
    ties = [i for i in traj.tie_indices if i < N]
    if not ties:
        H = pair_H(F, F, domain, kind, budget)
        return RegularizationResult(f, g, [], float(np.min(traj.gaps)), H, N, None, lock.radius)
    th_f = _theta(f, domain, theta0_f)
    th_g = _theta(g, domain, theta0_g)
    head = P[:N]
    candidates = [1.0]
    for i in range(N):
        candidates.append(kind.of(head[i] - lock.center) - lock.radius)
        for j in range(i + 1, N):
            candidates.append(kind.of(head[i] - head[j]) / 2.0)
    sigma = min(candidates)
    if not sigma > 0:
        raise ConsistencyError("pre-lock-in points coincide or touch the lock-in ball")
    step_eps = eps / (2.0 * N)
    phi, psi = f, g
    for i in ties:
        x = P[i]
        if traj.steps[i].taken is Choice.FIRST:
            psi = bump_push(psi, x, sigma, step_eps, th_g, kind)
        else:
            phi = bump_push(phi, x, sigma, step_eps, th_f, kind)
    G = PairMap(phi, psi)
    H = pair_H(F, G, domain, kind, budget)
    if not H.upper < eps:
        raise ConstructionError(f"H certificate {H.upper:.6g} is not below eps = {eps}")
    params = traj.params
    params = IterationParams(max_steps=len(traj.steps) - 1 if len(traj.steps) > 1 else 1,
                             tie_tol=traj.tie_tol, conv_tol=params.conv_tol,
                             branch_rule=params.branch_rule, norm=kind)
    redo = iterate(G, traj.x0, params, domain)
    Q = redo.points
    if len(Q) != len(P) or np.max(np.abs(Q - P)) > 1e-12:
        raise ConstructionError("the regularized pair does not reproduce the trajectory")
    margin = float(np.min(redo.gaps))
    if not (redo.regular and margin > 0):
        raise ConstructionError("projections along the trajectory are still not unique")
    return RegularizationResult(phi, psi, ties, margin, H, N, sigma, lock.radius)


# -- stability constants and shadowing ------------------------------------------


@dataclass(frozen=True)
class StabilityConstants:
    eps0: float
    alpha: float
    sigma: float
    N: int
    limit_branch: Choice
    xi: np.ndarray
    eps: float
    metric: str

    def to_dict(self) -> dict:
        return {"eps0": self.eps0, "alpha": self.alpha, "sigma": self.sigma, "N": self.N,
                "limit_branch": self.limit_branch.value, "xi": self.xi.tolist(), "eps": self.eps,
                "metric": self.metric}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _parse_metric(metric: str) -> str:
    key = str(metric).strip().lower().replace("_", "")
    if key in ("h", "hausdorff"):
        return "H"
    if key in ("hinf", "hinfty", "uniform"):
        return "h_inf"
    raise ValueError(f"metric must be 'H' or 'h_inf', got {metric!r}")


def stability_constants(f: MapExpr, g: MapExpr, traj: TrajectoryReport, domain: Domain,
                        metric: str = "H", eps: float | None = None,
                        budget: int = 4096) -> StabilityConstants:
    """(eps0, alpha, sigma, N) for a regular converged trajectory of {f, g}.

    eps0  = min{|g(xi) - xi| / 3, 1/2, d_inf(f, g)}  (g the non-limit branch)
    N     = first index with x_n in B(xi, eps/4) for all later n
    sigma = min{1, gap(x_k) : k = 0..N}
    alpha = min{(1 - max{lip f, lip g}) / 2, sigma / (4N)}

    N and alpha depend on ``eps``; it defaults to eps0 / 2.
    """
    kind = traj.norm
    metric = _parse_metric(metric)
    if not traj.regular:
        raise PreconditionError("the reference trajectory is not regular")
    if not traj.converged:
        raise PreconditionError("the reference trajectory has not converged")
    lf, lg = f.lipschitz(kind), g.lipschitz(kind)
    if not (lf < 1 and lg < 1):
        raise ContractViolation("both maps must be strict contractions")
    lock = tail_lock_in(traj, PairMap(f, g), domain)
    limit_map, other = (f, g) if lock.branch is Choice.FIRST else (g, f)
    xi = lock.center
    d_fg = d_infty(f, g, domain, kind, budget)
    eps0 = min(kind.of(other(xi) - xi) / 3.0, 0.5, d_fg.lower)
    if eps is None:
        eps = eps0 / 2.0
    if not 0 < eps < eps0:
        raise ValueError(f"eps must lie in (0, eps0 = {eps0:.6g})")
    P = traj.points
    outside = kind.rows(P - xi) >= eps / 4.0
    if outside[-1]:
        raise PreconditionError("trajectory does not reach B(xi, eps/4); iterate with a smaller conv_tol")
    N = int(np.nonzero(outside)[0][-1] + 1) if outside.any() else 0
    gaps = traj.gaps[:N + 1]
    sigma = float(min(1.0, gaps.min()))
    contraction = (1.0 - max(lf, lg)) / 2.0
    alpha = contraction if N == 0 else min(contraction, sigma / (4.0 * N))
    return StabilityConstants(eps0, alpha, sigma, N, lock.branch, xi, eps, metric)


def perturb_map(m: MapExpr, size: float, domain: Domain, kind: Norm, rng, style: str = "auto",
                theta0: float | None = None, attempts: int = 50) -> MapExpr:
    """A nonexpansive self-map with certified d_inf(m, result) < size.

    Styles: ``affine`` (random matrix/offset perturbation of an affine map),
    ``shift`` (``Shifted`` towards a random point) and ``bump`` (``Bump`` at a
    random centre, needs theta0 and a strict contraction).
    """
    rng = _rng(rng)
    diam = diameter(domain, kind)
    styles = ["shift"]
    if isinstance(m, Affine):
        styles.append("affine")
    if theta0 is not None and theta0 > 1 and m.lipschitz(kind) < 1:
        styles.append("bump")
    for _ in range(attempts):
        s = rng.choice(styles) if style == "auto" else style
        magnitude = size * rng.uniform(0.05, 0.95)
        if s == "affine":
            E = rng.uniform(-1, 1, m.A.shape)
            e = rng.uniform(-1, 1, m.dim)
            cand = Affine(m.A + E, m.b + e)
            scale = d_infty(m, cand, domain, kind).upper
            cand = Affine(m.A + E * (magnitude / scale), m.b + e * (magnitude / scale))
        elif s == "shift":
            y = domain.center + (rng.uniform(-1, 1, m.dim) * (domain.halfwidth if isinstance(domain, Box)
                                                               else domain.radius / np.sqrt(m.dim)))
            delta = min(0.5, magnitude / diam)
            cand = Shifted(m, y, delta)
        elif s == "bump":
            eta = domain.center + 0.5 * rng.uniform(-1, 1, m.dim) * (
                domain.halfwidth if isinstance(domain, Box) else domain.radius / np.sqrt(m.dim))
            sigma = rng.uniform(0.05, 0.5) * diam
            cand = Bump.from_budget(m, eta, sigma, magnitude, theta0, kind)
        else:
            raise ValueError(f"unknown perturbation style {s!r}")
        try:
            if cand.lipschitz(kind) > 1.0:
                continue
        except ConvergenceError:
            continue
        if d_infty(m, cand, domain, kind).upper >= size:
            continue
        if not verify_self_map(cand, domain, kind, budget=2000).ok:
            continue
        return cand
    raise ConstructionError("could not draw an admissible perturbation")


@dataclass(frozen=True)
class ShadowingOutcome:
    eps: float
    alpha: float
    distance: Interval
    regular: bool
    sup_deviation: float
    ok: bool
    swapped: bool = False


def _pad_to_common_length(x: np.ndarray, y: np.ndarray):
    # pad the shorter (converged) run with its last point
    n = max(len(x), len(y))
    X = np.vstack([x, np.repeat(x[-1:], n - len(x), axis=0)])
    Y = np.vstack([y, np.repeat(y[-1:], n - len(y), axis=0)])
    return X, Y


def shadowing_trial(f: MapExpr, g: MapExpr, traj: TrajectoryReport, constants: StabilityConstants,
                    perturbed: PairMap, domain: Domain, budget: int = 4096) -> ShadowingOutcome:
    """Certify dist({f,g}, perturbed) < alpha*eps, iterate the perturbed pair, compare.

    The comparison pads the shorter run with its last point; converged runs
    change by less than their residual bound afterwards.
    """
    kind = traj.norm
    F = PairMap(f, g)
    if constants.metric == "H":
        dist = pair_H(F, perturbed, domain, kind, budget)
    else:
        dist = pair_h_infty(F, perturbed, domain, kind, budget)
    radius = constants.alpha * constants.eps
    if not dist.upper < radius:
        raise PreconditionError(f"perturbed pair not certified inside the {constants.metric}-ball")
    params = traj.params
    run = iterate(perturbed, traj.x0, IterationParams(
        max_steps=params.max_steps, tie_tol=traj.tie_tol, conv_tol=params.conv_tol,
        branch_rule=params.branch_rule, norm=kind), domain)
    X, Y = _pad_to_common_length(traj.points, run.points)
    sup_dev = float(kind.rows(X - Y).max())
    ok = run.regular and sup_dev <= constants.eps
    return ShadowingOutcome(constants.eps, constants.alpha, dist, run.regular, sup_dev, ok)


def random_perturbed_pair(f: MapExpr, g: MapExpr, size: float, domain: Domain, kind: Norm, rng,
                          theta0_f: float | None = None, theta0_g: float | None = None,
                          swap: bool | None = None) -> PairMap:
    """{phi, psi} with d_inf(f, phi), d_inf(g, psi) < size, listed in random order."""
    rng = _rng(rng)
    phi = perturb_map(f, size, domain, kind, rng, theta0=theta0_f)
    psi = perturb_map(g, size, domain, kind, rng, theta0=theta0_g)
    if swap is None:
        swap = bool(rng.integers(2))
    return PairMap(psi, phi) if swap else PairMap(phi, psi)
