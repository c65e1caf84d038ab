"""Configuration-driven experiments: run, regularize, stability, probe, verify.

A config is one JSON document::

    {
      "domain": {"type": "box", "lower": [0, 0], "upper": [1, 1]},
      "norm": "L2",
      "pair": {"first": {...}, "second": {...}},
      "x0": [0.5, 0.5],
      "params": {"max_steps": 10000, "conv_tol": 1e-12, "branch_rule": "first"},
      "seed": 7,
      "experiment": {"type": "run"}
    }

Experiment types and their fields:

* ``run``
* ``regularize``  ``eps``
* ``stability``   ``metric`` (H or h_inf), ``trials`` per eps, and either
  ``eps_grid`` (absolute values below eps0) or ``eps_fractions`` (multiples of
  eps0, default [0.5, 0.1])
* ``probe``       ``samples``
* ``verify``      ``suites`` (default: all), ``instances`` per suite

``pair`` is required by run, regularize and stability; ``seed`` is required
by stability, probe and verify.
"""
from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .errors import ConstructionError, ConsistencyError, PreconditionError
from .generators import random_affine_self_map, random_strict_pair, tie_pair
from .geometry import (
    Box,
    Domain,
    Norm,
    as_point,
    contains,
    diameter,
    domain_from_dict,
    hausdorff_finite,
    metric_projection_two,
    sample_uniform,
)
from .iteration import (
    BranchRule,
    Choice,
    IterationParams,
    TrajectoryReport,
    banach_violations,
    detect_cycle,
    iterate,
    tail_lock_in,
    trajectory_csv,
)
from .maps import Affine, d_infty, extension_margin, fixed_point
from .pairs import PairMap, pair_H, pair_h_infty, pointwise_hausdorff, remark_counterexample
from .perturbations import (
    _parse_metric,
    average_identity,
    bump_push,
    fixed_point_distance_bound,
    random_perturbed_pair,
    regularize_pair,
    shadowing_trial,
    shift_toward,
    stability_constants,
)

EXPERIMENTS = ("run", "regularize", "stability", "probe", "verify")
RANDOMIZED = ("stability", "probe", "verify")


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


# -- configuration -------------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    type: str
    eps: float | None = None
    metric: str = "H"
    trials: int = 20
    eps_grid: tuple | None = None
    eps_fractions: tuple = (0.5, 0.1)
    samples: int = 200
    suites: tuple | None = None
    instances: int = 100

    def to_dict(self) -> dict:
        out = {"type": self.type}
        if self.type == "regularize":
            out["eps"] = self.eps
        elif self.type == "stability":
            out.update(metric=self.metric, trials=self.trials,
                       eps_grid=None if self.eps_grid is None else list(self.eps_grid),
                       eps_fractions=list(self.eps_fractions))
        elif self.type == "probe":
            out["samples"] = self.samples
        elif self.type == "verify":
            out.update(suites=None if self.suites is None else list(self.suites), instances=self.instances)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    domain: Domain
    norm: Norm
    pair: PairMap | None
    x0: np.ndarray
    params: IterationParams
    experiment: Experiment
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(), "norm": self.norm.value,
            "pair": None if self.pair is None else self.pair.to_dict(),
            "x0": self.x0.tolist(), "params": self.params.to_dict(),
            "experiment": self.experiment.to_dict(), "seed": self.seed,
        }


def _positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return value


def _parse_experiment(data) -> Experiment:
    if isinstance(data, str):
        data = {"type": data}
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError("experiment must be an object with a 'type' field")
    kind = str(data["type"]).lower()
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment type {data['type']!r}; expected one of {', '.join(EXPERIMENTS)}")
    if kind == "regularize":
        eps = data.get("eps")
        if not isinstance(eps, (int, float)) or not eps > 0:
            raise ConfigError("regularize needs a positive 'eps'")
        return Experiment(kind, eps=float(eps))
    if kind == "stability":
        try:
            metric = _parse_metric(data.get("metric", "H"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        trials = _positive_int(data.get("trials", 20), "trials")
        grid = data.get("eps_grid")
        if grid is not None:
            grid = tuple(float(e) for e in grid)
            if not grid or any(not e > 0 for e in grid):
                raise ConfigError("eps_grid must be a non-empty list of positive numbers")
        fractions = tuple(float(e) for e in data.get("eps_fractions", (0.5, 0.1)))
        if not fractions or any(not 0 < e < 1 for e in fractions):
            raise ConfigError("eps_fractions must lie in (0, 1)")
        return Experiment(kind, metric=metric, trials=trials, eps_grid=grid, eps_fractions=fractions)
    if kind == "probe":
        return Experiment(kind, samples=_positive_int(data.get("samples", 200), "samples"))
    if kind == "verify":
        suites = data.get("suites")
        if suites is not None:
            suites = tuple(str(s) for s in suites)
            unknown = [s for s in suites if s not in SUITES]
            if unknown:
                raise ConfigError(f"unknown verify suites: {', '.join(unknown)}")
        return Experiment(kind, suites=suites, instances=_positive_int(data.get("instances", 100), "instances"))
    return Experiment(kind)


def parse_config(data: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate a config document; ``seed`` (when given) overrides the config's seed."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        domain = domain_from_dict(data.get("domain", {"type": "box", "lower": [0, 0], "upper": [1, 1]}))
        norm = Norm.parse(data.get("norm", "L2"))
        params_data = dict(data.get("params", {}))
        params_data.setdefault("norm", norm.value)
        params = IterationParams.from_dict(params_data)
        if params.norm is not norm:
            raise ConfigError("params.norm disagrees with the top-level norm")
        pair = PairMap.from_dict(data["pair"]) if data.get("pair") is not None else None
        x0 = as_point(data["x0"], domain.dim) if data.get("x0") is not None else domain.center.copy()
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    experiment = _parse_experiment(data.get("experiment", {"type": "run"}))
    if pair is not None and pair.dim != domain.dim:
        raise ConfigError(f"pair has dimension {pair.dim} but the domain has {domain.dim}")
    if experiment.type in ("run", "regularize", "stability") and pair is None:
        raise ConfigError(f"experiment {experiment.type!r} needs a 'pair'")
    if not contains(domain, x0, 1e-12 * diameter(domain, norm), norm):
        raise ConfigError("x0 lies outside the domain")
    if seed is None:
        seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    if experiment.type in RANDOMIZED and seed is None:
        raise ConfigError(f"experiment {experiment.type!r} is randomized and needs a 'seed'")
    return ExperimentConfig(domain, norm, pair, x0, params, experiment, seed)


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(data, seed)


# -- results ----------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    """Report payload, the violated properties, and any trajectory to export."""

    report: dict
    violations: list = field(default_factory=list)
    trajectory: TrajectoryReport | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def report_json(result: ExperimentResult) -> str:
    """The deterministic part of a report, as sorted-key JSON."""
    return json.dumps(_jsonable(result.report), sort_keys=True, indent=2)


def _trajectory_summary(t: TrajectoryReport) -> dict:
    return {
        "steps": len(t.steps), "converged": t.converged, "regular": t.regular,
        "limit": None if t.limit is None else t.limit, "tie_indices": t.tie_indices,
        "tie_tol": t.tie_tol, "min_gap": float(np.min(t.gaps)),
    }


# -- experiments ------------------------------------------------------------------------


def _run(cfg: ExperimentConfig) -> ExperimentResult:
    F, kind = cfg.pair, cfg.norm
    t = iterate(F, cfg.x0, cfg.params, cfg.domain)
    report = {"trajectory": _trajectory_summary(t)}
    violations = []
    L = F.lipschitz(kind)
    report["lipschitz"] = L
    if L < 1:
        bad = banach_violations(t, L)
        report["banach_bound"] = {"L": L, "violations": len(bad)}
        if bad:
            violations.append(f"banach_bound: {len(bad)} violations, first {bad[0]}")
        cycle = detect_cycle(t, 1e-10, L)
        report["cycle"] = None if cycle is None else {"k": cycle.k, "p": cycle.p, "fixed": cycle.fixed}
        if cycle is not None and not cycle.fixed:
            violations.append(f"no_cycles: non-stationary repeat at k={cycle.k}, p={cycle.p}")
        try:
            lock = tail_lock_in(t, F, cfg.domain)
            report["lock_in"] = {"branch": lock.branch, "index": lock.index, "center": lock.center,
                                 "radius": lock.radius}
        except (PreconditionError, ConsistencyError) as exc:
            report["lock_in"] = {"unavailable": str(exc)}
    if t.converged:
        residual = min(kind.of(F.first(t.limit) - t.limit), kind.of(F.second(t.limit) - t.limit))
        report["trajectory"]["residual"] = residual
        if residual > cfg.params.conv_tol:
            violations.append(f"limit_residual: {residual:.3g} exceeds conv_tol")
    return ExperimentResult(report, violations, t)


def _regularize(cfg: ExperimentConfig) -> ExperimentResult:
    F, eps = cfg.pair, cfg.experiment.eps
    t = iterate(F, cfg.x0, cfg.params, cfg.domain)
    f, g = F.first, F.second
    report = {"trajectory": _trajectory_summary(t), "eps": eps}
    th_f, th_g = extension_margin(f, cfg.domain), extension_margin(g, cfg.domain)
    pre = []
    if t.tie_indices and (th_f is None or th_g is None):
        # averaging gives every map an extension margin; it costs half the budget
        if th_f is None:
            f, th_f = average_identity(f, eps / 2.0, cfg.domain, cfg.norm)
            pre.append("first")
        if th_g is None:
            g, th_g = average_identity(g, eps / 2.0, cfg.domain, cfg.norm)
            pre.append("second")
        t = iterate(PairMap(f, g), cfg.x0, cfg.params, cfg.domain)
    budget = eps / 2.0 if pre else eps
    res = regularize_pair(f, g, t, budget, cfg.domain, th_f, th_g)
    H_total = pair_H(F, res.pair, cfg.domain, cfg.norm)
    report["averaged"] = pre
    report["result"] = res.to_dict()
    report["H_total"] = {"lower": H_total.lower, "upper": H_total.upper}
    violations = [] if H_total.upper < eps else [f"regularize: H {H_total.upper:.6g} not below eps"]
    return ExperimentResult(report, violations, t)


def _stability(cfg: ExperimentConfig) -> ExperimentResult:
    F, kind, exp = cfg.pair, cfg.norm, cfg.experiment
    rng = np.random.default_rng(cfg.seed)
    t = iterate(F, cfg.x0, cfg.params, cfg.domain)
    base = stability_constants(F.first, F.second, t, cfg.domain, exp.metric)
    grid = exp.eps_grid if exp.eps_grid is not None else tuple(r * base.eps0 for r in exp.eps_fractions)
    th_f, th_g = extension_margin(F.first, cfg.domain), extension_margin(F.second, cfg.domain)
    trials, violations = [], []
    for eps in grid:
        if not eps < base.eps0:
            raise ConfigError(f"eps = {eps} is not below eps0 = {base.eps0:.6g}")
        c = stability_constants(F.first, F.second, t, cfg.domain, exp.metric, eps=eps)
        for j in range(exp.trials):
            P = random_perturbed_pair(F.first, F.second, c.alpha * eps, cfg.domain, kind, rng, th_f, th_g)
            out = shadowing_trial(F.first, F.second, t, c, P, cfg.domain)
            trials.append({"index": len(trials), "eps": eps, "alpha": c.alpha, "N": c.N,
                           "distance_upper": out.distance.upper, "regular": out.regular,
                           "sup_deviation": out.sup_deviation, "ok": out.ok})
            if not out.ok:
                violations.append(f"shadowing: trial {len(trials) - 1} at eps={eps:.6g} "
                                  f"(regular={out.regular}, deviation={out.sup_deviation:.3g})")
    report = {"trajectory": _trajectory_summary(t), "constants": base.to_dict(), "metric": exp.metric,
              "trials": trials, "violations": len(violations)}
    return ExperimentResult(report, violations, t)


@dataclass(frozen=True)
class ProbeReport:
    samples: int
    fraction_regular: float
    fraction_converged: float
    fraction_regular_after_regularization: float
    seed: int
    u: np.ndarray
    norm: Norm

    def to_dict(self) -> dict:
        return {"samples": self.samples, "fraction_regular": self.fraction_regular,
                "fraction_converged": self.fraction_converged,
                "fraction_regular_after_regularization": self.fraction_regular_after_regularization,
                "seed": self.seed, "u": self.u.tolist(), "norm": self.norm.value}


def _regularized_is_regular(F: PairMap, t: TrajectoryReport, domain: Domain, kind: Norm,
                            eps: float) -> bool:
    f, g = F.first, F.second
    th_f, th_g = extension_margin(f, domain), extension_margin(g, domain)
    budget = eps
    if th_f is None or th_g is None:
        budget = eps / 2.0
        if th_f is None:
            f, th_f = average_identity(f, budget, domain, kind)
        if th_g is None:
            g, th_g = average_identity(g, budget, domain, kind)
        t = iterate(PairMap(f, g), t.x0, t.params, domain)
        if t.regular:
            return True
    res = regularize_pair(f, g, t, budget, domain, th_f, th_g)
    redo = iterate(res.pair, t.x0, t.params, domain)
    return redo.regular and redo.converged


def genericity_probe(domain: Domain, norm: Norm | str, samples: int, seed: int, u=None,
                     params: IterationParams | None = None, eps: float = 0.05,
                     pairs=None) -> ProbeReport:
    """Iterate ``samples`` random strict-contraction pairs from one initial point ``u``.

    Non-regular instances are regularized within H-distance ``eps`` and
    re-iterated. Results are for this ``u`` only. ``pairs`` replaces the
    random draws with given instances.
    """
    kind = Norm.parse(norm)
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    u = domain.center.copy() if u is None else as_point(u, domain.dim)
    params = params or IterationParams(norm=kind)
    regular = converged = after = 0
    source = iter(pairs) if pairs is not None else None
    for _ in range(samples):
        F = next(source) if source is not None else random_strict_pair(domain, kind, rng)
        t = iterate(F, u, params, domain)
        converged += t.converged
        if t.regular:
            regular += 1
            after += 1
        else:
            try:
                after += _regularized_is_regular(F, t, domain, kind, eps)
            except (ConstructionError, ConsistencyError, PreconditionError):
                pass
    return ProbeReport(samples, regular / samples, converged / samples, after / samples, seed, u, kind)


def _probe(cfg: ExperimentConfig) -> ExperimentResult:
    rep = genericity_probe(cfg.domain, cfg.norm, cfg.experiment.samples, cfg.seed, cfg.x0, cfg.params)
    violations = []
    if rep.fraction_converged < 1.0:
        violations.append(f"convergence: fraction_converged = {rep.fraction_converged}")
    if rep.fraction_regular_after_regularization < 1.0:
        violations.append("regularize_pair: some regularized instances are not regular")
    return ExperimentResult({"probe": rep.to_dict()}, violations)


# -- verify suites ------------------------------------------------------------------------


@dataclass
class SuiteContext:
    rng: np.random.Generator
    instances: int
    domain: Domain
    norm: Norm

    @property
    def box(self) -> Box:
        """Suites that need exact box arithmetic run on the bounding box of a ball."""
        return self.domain if isinstance(self.domain, Box) else self.domain.bounding_box()

    def pair(self, need_margin: bool = False) -> PairMap:
        return random_strict_pair(self.box, self.norm, self.rng, need_margin=need_margin)

    def point(self) -> np.ndarray:
        return sample_uniform(self.box, 1, self.rng)[0]


SUITES: dict[str, tuple[str, Callable[[SuiteContext], list]]] = {}


def suite(name: str, description: str):
    def register(fn):
        SUITES[name] = (description, fn)
        return fn
    return register


@suite("norm_axioms", "triangle inequality and absolute homogeneity of the norm")
def _suite_norm(ctx: SuiteContext) -> list:
    bad = []
    d = ctx.domain.dim
    for i in range(ctx.instances):
        x, y = ctx.rng.standard_normal(d), ctx.rng.standard_normal(d)
        lam = ctx.rng.uniform(-5, 5)
        n = ctx.norm
        if n.of(x + y) > (n.of(x) + n.of(y)) * (1 + 1e-12):
            bad.append(f"triangle inequality fails at instance {i}")
        if abs(n.of(lam * x) - abs(lam) * n.of(x)) > 1e-12 * abs(lam) * n.of(x):
            bad.append(f"homogeneity fails at instance {i}")
    return bad


@suite("hausdorff_metric", "finite Hausdorff distance is a metric on sets of at most two points")
def _suite_hausdorff(ctx: SuiteContext) -> list:
    bad = []
    d = ctx.domain.dim
    for i in range(ctx.instances):
        S, T, U = (ctx.rng.standard_normal((int(ctx.rng.integers(1, 3)), d)) for _ in range(3))
        st, ts = hausdorff_finite(S, T, ctx.norm), hausdorff_finite(T, S, ctx.norm)
        if st != ts:
            bad.append(f"asymmetric at instance {i}")
        if st > hausdorff_finite(S, U, ctx.norm) + hausdorff_finite(U, T, ctx.norm) + 1e-12:
            bad.append(f"triangle inequality fails at instance {i}")
        if hausdorff_finite(S, S[::-1], ctx.norm) != 0.0:
            bad.append(f"nonzero distance between equal sets at instance {i}")
    return bad


@suite("projection_ties", "two-point projection is a singleton iff the distances differ; gap is swap-invariant")
def _suite_projection(ctx: SuiteContext) -> list:
    bad = []
    for i in range(ctx.instances):
        x, a, b = ctx.point(), ctx.point(), ctx.point()
        if i % 4 == 0:
            b = a.copy()
        r, s = metric_projection_two(x, a, b, ctx.norm), metric_projection_two(x, b, a, ctx.norm)
        da, db = ctx.norm.of(x - a), ctx.norm.of(x - b)
        if (len(r.selected) == 1) != (da != db):
            bad.append(f"singleton/tie mismatch at instance {i}")
        if r.gap != s.gap:
            bad.append(f"gap not swap-invariant at instance {i}")
        if ctx.norm.of(x - r.selected[0]) != min(da, db):
            bad.append(f"selected point not nearest at instance {i}")
    return bad


@suite("lipschitz_soundness", "|m(x) - m(y)| <= lip |x - y| for random pairs of points")
def _suite_lipschitz(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 10)):
        m = random_affine_self_map(ctx.box, ctx.norm, ctx.rng)
        L = m.lipschitz(ctx.norm)
        X, Y = sample_uniform(ctx.box, 1000, ctx.rng), sample_uniform(ctx.box, 1000, ctx.rng)
        lhs = ctx.norm.rows(m.apply_many(X) - m.apply_many(Y))
        if np.any(lhs > L * ctx.norm.rows(X - Y) + 1e-10):
            bad.append(f"Lipschitz bound violated for map {i}")
    return bad


@suite("d_infty_enclosure", "the exact uniform distance lies in every sampled enclosure")
def _suite_dinf(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 10)):
        F = ctx.pair()
        exact = d_infty(F.first, F.second, ctx.box, ctx.norm)
        for budget in (16, 256, 2048):
            iv = d_infty(F.first, F.second, ctx.box, ctx.norm, budget=budget, method="sample")
            if not iv.lower - 1e-12 <= exact.upper and exact.lower <= iv.upper + 1e-12:
                bad.append(f"enclosure at budget {budget} misses the exact value for instance {i}")
    return bad


@suite("shift_toward", "shifted map is eps-close, has a new fixed point and a smaller Lipschitz bound")
def _suite_shift(ctx: SuiteContext) -> list:
    bad = []
    for i in range(ctx.instances):
        f = random_affine_self_map(ctx.box, ctx.norm, ctx.rng)
        eps = float(ctx.rng.choice([0.01, 0.1]))
        phi = shift_toward(f, eps, ctx.box, ctx.norm, rng_seed=int(ctx.rng.integers(2**31)))
        xi, eta = fixed_point(f, ctx.box, ctx.norm), fixed_point(phi, ctx.box, ctx.norm)
        if not d_infty(f, phi, ctx.box, ctx.norm).upper < eps:
            bad.append(f"d_inf not below eps at instance {i}")
        sep = ctx.norm.of(xi - eta)
        if not 0 < sep < fixed_point_distance_bound(f, phi, eps, ctx.norm):
            bad.append(f"fixed point separation {sep:.3g} outside the admissible range at instance {i}")
        if not phi.lipschitz(ctx.norm) < f.lipschitz(ctx.norm):
            bad.append(f"Lipschitz bound did not decrease at instance {i}")
    return bad


@suite("average_identity", "averaged map is eps-close and extends to theta0 = 1/t inside the domain")
def _suite_average(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 10)):
        f = random_affine_self_map(ctx.box, ctx.norm, ctx.rng)
        eps = float(ctx.rng.uniform(0.01, 0.5))
        phi, theta0 = average_identity(f, eps, ctx.box, ctx.norm)
        if not d_infty(f, phi, ctx.box, ctx.norm).upper < eps:
            bad.append(f"d_inf not below eps at instance {i}")
        X = sample_uniform(ctx.box, 1000, ctx.rng)
        ext = theta0 * phi.apply_many(X) + (1 - theta0) * X
        if np.max(np.abs(ext - f.apply_many(X))) > 1e-12 * max(1.0, diameter(ctx.box, ctx.norm)):
            bad.append(f"extension point differs from f(x) at instance {i}")
        if np.any(ctx.box.distances_to(ext, ctx.norm) > 1e-12):
            bad.append(f"extension point leaves the domain at instance {i}")
    return bad


@suite("bump_push", "bump leaves the map unchanged off its ball and pushes f(eta) away from eta")
def _suite_bump(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 10)):
        f = random_affine_self_map(ctx.box, ctx.norm, ctx.rng, need_margin=True)
        theta0 = extension_margin(f, ctx.box)
        eta, sigma = ctx.point(), float(ctx.rng.uniform(0.05, 0.3)) * diameter(ctx.box, ctx.norm)
        b = bump_push(f, eta, sigma, 0.1, theta0, ctx.norm)
        X = sample_uniform(ctx.box, 4000, ctx.rng)
        X = X[ctx.norm.rows(X - eta) >= sigma][:1000]
        if np.any(b.apply_many(X) != f.apply_many(X)):
            bad.append(f"bump changes the map off its ball at instance {i}")
        if not b.lipschitz(ctx.norm) <= 1 - b.alpha + 1e-15:
            bad.append(f"Lipschitz certificate above 1 - alpha at instance {i}")
        push = b(eta) - f(eta)
        c = b.gamma_sup
        if not (c > 0 and np.allclose(push, c * (f(eta) - eta), rtol=1e-12, atol=1e-15)):
            bad.append(f"push at eta is not a positive multiple of f(eta) - eta at instance {i}")
    return bad


@suite("swap_invariance", "pair distances do not depend on the listing order")
def _suite_swap(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 5)):
        F, G = ctx.pair(), ctx.pair()
        ref = pair_H(F, G, ctx.box, ctx.norm)
        for A, B in ((F.swapped(), G), (F, G.swapped()), (G, F)):
            if pair_H(A, B, ctx.box, ctx.norm) != ref:
                bad.append(f"H changes under swapping at instance {i}")
                break
    return bad


@suite("H_metric_axioms", "H is symmetric, satisfies the triangle inequality and vanishes on equal pairs")
def _suite_H(ctx: SuiteContext) -> list:
    bad = []
    for i in range(ctx.instances):
        F, G, K = ctx.pair(), ctx.pair(), ctx.pair()
        fg, gf = pair_H(F, G, ctx.box, ctx.norm), pair_H(G, F, ctx.box, ctx.norm)
        if fg.upper != gf.upper:
            bad.append(f"asymmetric at instance {i}")
        fk, kg = pair_H(F, K, ctx.box, ctx.norm), pair_H(K, G, ctx.box, ctx.norm)
        if fg.lower > fk.upper + kg.upper + 1e-12:
            bad.append(f"triangle inequality fails at instance {i}")
        if pair_H(F, F.swapped(), ctx.box, ctx.norm).upper != 0.0:
            bad.append(f"H of a pair with itself is nonzero at instance {i}")
    return bad


@suite("h_inf_below_H", "the uniform pointwise Hausdorff distance never exceeds H")
def _suite_hinf(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 5)):
        F, G = ctx.pair(), ctx.pair()
        H, h = pair_H(F, G, ctx.box, ctx.norm), pair_h_infty(F, G, ctx.box, ctx.norm)
        if h.lower > H.upper + 1e-12:
            bad.append(f"h_inf exceeds H at instance {i}")
        X = sample_uniform(ctx.box, 200, ctx.rng)
        if max(pointwise_hausdorff(F, G, x, ctx.norm) for x in X) > H.upper + 1e-12:
            bad.append(f"pointwise distance exceeds H at instance {i}")
    return bad


@suite("matched_selection", "componentwise eps-matching implies pointwise and H distances below eps")
def _suite_matched(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 5)):
        F = ctx.pair()
        eps = 0.05
        G = PairMap(*(Affine(m.A, m.b + ctx.rng.uniform(-1, 1, m.dim) * 0.4 * eps / np.sqrt(m.dim))
                      for m in F.maps))
        if ctx.rng.integers(2):
            G = G.swapped()
        if not pair_H(F, G, ctx.box, ctx.norm).upper < eps:
            bad.append(f"H not below eps at instance {i}")
        X = sample_uniform(ctx.box, 200, ctx.rng)
        if max(pointwise_hausdorff(F, G, x, ctx.norm) for x in X) >= eps:
            bad.append(f"pointwise distance not below eps at instance {i}")
    return bad


@suite("h_inf_counterexample", "a pair can be h_inf-close while neither component matching is close")
def _suite_h_inf_counterexample(ctx: SuiteContext) -> list:
    F, G, D = remark_counterexample(0.1)
    h = pair_h_infty(F, G, D, Norm.L2)
    direct = max(d_infty(F.first, G.first, D, Norm.L2).lower, d_infty(F.second, G.second, D, Norm.L2).lower)
    crossed = max(d_infty(F.first, G.second, D, Norm.L2).lower, d_infty(F.second, G.first, D, Norm.L2).lower)
    bad = []
    if h.upper > 0.05 + 1e-6:
        bad.append(f"h_inf upper bound {h.upper:.6g} exceeds eps/2")
    if min(direct, crossed) < 2 - 1e-6:
        bad.append(f"a component matching is closer than 2: {min(direct, crossed):.6g}")
    return bad


def _trajectories(ctx: SuiteContext, count: int | None = None):
    for i in range(ctx.instances if count is None else count):
        F = ctx.pair()
        yield i, F, iterate(F, ctx.point(), IterationParams(norm=ctx.norm), ctx.box)


@suite("banach_bound", "a-priori geometric bound |x_{n+k} - x_n| <= |x_1 - x_0| L^n / (1 - L)")
def _suite_banach(ctx: SuiteContext) -> list:
    bad = []
    for i, F, t in _trajectories(ctx):
        v = [x for x in banach_violations(t, F.lipschitz(ctx.norm)) if x[0] == "a_priori"]
        if v:
            bad.append(f"instance {i}: {v[0]}")
    return bad


@suite("step_contraction", "step lengths shrink by at least the factor L")
def _suite_steps(ctx: SuiteContext) -> list:
    bad = []
    for i, F, t in _trajectories(ctx):
        v = [x for x in banach_violations(t, F.lipschitz(ctx.norm)) if x[0] == "stepwise"]
        if v:
            bad.append(f"instance {i}: {v[0]}")
    return bad


@suite("step_optimality", "the chosen branch is never farther than the other by more than tie_tol")
def _suite_optimal(ctx: SuiteContext) -> list:
    bad = []
    for i, F, t in _trajectories(ctx):
        for s in t.steps:
            da, db = ctx.norm.of(F.first(s.point) - s.point), ctx.norm.of(F.second(s.point) - s.point)
            taken = da if s.taken is Choice.FIRST else db
            if taken > min(da, db) + t.tie_tol:
                bad.append(f"instance {i}, step {s.index}: farther branch chosen")
                break
    return bad


@suite("convergence", "converged within the a-priori step count, residual at limit <= conv_tol")
def _suite_convergence(ctx: SuiteContext) -> list:
    bad = []
    for i in range(ctx.instances):
        F = ctx.pair()
        L = F.lipschitz(ctx.norm)
        tol = 1e-12
        diam = diameter(ctx.box, ctx.norm)
        steps = math.ceil(math.log(tol * (1 - L) / diam) / math.log(L)) + 2 if L > 0 else 2
        t = iterate(F, ctx.point(), IterationParams(max_steps=steps, conv_tol=tol, norm=ctx.norm), ctx.box)
        if not t.converged:
            bad.append(f"instance {i}: not converged in {steps} steps")
            continue
        z = t.limit
        if min(ctx.norm.of(F.first(z) - z), ctx.norm.of(F.second(z) - z)) > tol:
            bad.append(f"instance {i}: residual above conv_tol")
        xi = fixed_point(F.first, ctx.box, ctx.norm, tol=1e-15)
        eta = fixed_point(F.second, ctx.box, ctx.norm, tol=1e-15)
        near = min(ctx.norm.of(z - xi), ctx.norm.of(z - eta))
        if near > tol / (1 - L) + 1e-14:
            bad.append(f"instance {i}: limit {near:.3g} away from the nearest fixed point")
    return bad


@suite("branch_rule_independence", "regular trajectories do not depend on the tie policy")
def _suite_rule(ctx: SuiteContext) -> list:
    bad = []
    for i, F, t in _trajectories(ctx):
        if not t.regular:
            continue
        other = iterate(F, t.x0, IterationParams(branch_rule=BranchRule.SECOND, norm=ctx.norm), ctx.box)
        if other.points.shape != t.points.shape or np.any(other.points != t.points):
            bad.append(f"instance {i}: trajectories differ")
    return bad


@suite("no_cycles", "every near-repeat of a trajectory sits on a stationary tail")
def _suite_cycles(ctx: SuiteContext) -> list:
    bad = []
    for i, F, t in _trajectories(ctx):
        c = detect_cycle(t, 1e-10, F.lipschitz(ctx.norm))
        if c is not None and not c.fixed:
            bad.append(f"instance {i}: repeat at k={c.k}, p={c.p} with a moving tail")
    return bad


@suite("regularize_pair", "regularized tie pairs are H-close, reproduce the trajectory and are regular")
def _suite_regularize(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 2)):
        F = tie_pair(ctx.box, ctx.norm, ctx.rng)
        t = iterate(F, ctx.box.center, IterationParams(norm=ctx.norm), ctx.box)
        try:
            res = regularize_pair(F.first, F.second, t, 0.05, ctx.box)
        except (ConstructionError, ConsistencyError, PreconditionError) as exc:
            bad.append(f"instance {i}: {exc}")
            continue
        if not (res.H.upper < 0.05 and res.margin > 0):
            bad.append(f"instance {i}: H {res.H.upper:.3g}, margin {res.margin:.3g}")
        X = sample_uniform(ctx.box, 500, ctx.rng)
        far = np.ones(len(X), dtype=bool)
        for k in res.touched_indices:
            far &= ctx.norm.rows(X - t.points[k]) >= res.sigma
        if np.any(res.phi.apply_many(X[far]) != F.first.apply_many(X[far])) or \
                np.any(res.psi.apply_many(X[far]) != F.second.apply_many(X[far])):
            bad.append(f"instance {i}: maps changed away from the touched balls")
    return bad


@suite("shadowing", "alpha*eps-close pairs give regular trajectories that stay eps-close")
def _suite_shadowing(ctx: SuiteContext) -> list:
    bad = []
    for i in range(max(1, ctx.instances // 10)):
        F = ctx.pair(need_margin=True)
        t = iterate(F, ctx.point(), IterationParams(norm=ctx.norm), ctx.box)
        if not t.regular:
            continue
        th = extension_margin(F.first, ctx.box), extension_margin(F.second, ctx.box)
        for metric in ("H", "h_inf"):
            base = stability_constants(F.first, F.second, t, ctx.box, metric)
            for eps in (base.eps0 / 2, base.eps0 / 10):
                c = stability_constants(F.first, F.second, t, ctx.box, metric, eps=eps)
                for _ in range(5):
                    P = random_perturbed_pair(F.first, F.second, c.alpha * eps, ctx.box, ctx.norm, ctx.rng, *th)
                    out = shadowing_trial(F.first, F.second, t, c, P, ctx.box)
                    if not out.ok:
                        bad.append(f"instance {i} ({metric}, eps={eps:.3g}): deviation {out.sup_deviation:.3g}")
    return bad


def run_suites(names, instances: int, domain: Domain, norm: Norm, seed: int) -> dict:
    """Run the named suites, each with its own generator derived from ``seed``."""
    out = {}
    for k, name in enumerate(names):
        description, fn = SUITES[name]
        ctx = SuiteContext(np.random.default_rng([seed, k]), instances, domain, norm)
        failures = fn(ctx)
        out[name] = {"description": description, "passed": not failures, "failures": failures}
    return out


def _verify(cfg: ExperimentConfig) -> ExperimentResult:
    names = cfg.experiment.suites or tuple(SUITES)
    results = run_suites(names, cfg.experiment.instances, cfg.domain, cfg.norm, cfg.seed)
    violations = [f"{name}: {msg}" for name, r in results.items() for msg in r["failures"]]
    return ExperimentResult({"suites": results}, violations)


_RUNNERS = {"run": _run, "regularize": _regularize, "stability": _stability, "probe": _probe,
            "verify": _verify}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    result = _RUNNERS[cfg.experiment.type](cfg)
    result.report = {"config": cfg.to_dict(), "experiment": cfg.experiment.type,
                     "ok": result.ok, "violations": result.violations, **result.report}
    return result


# -- output ----------------------------------------------------------------------------------


def plot_svg(t: TrajectoryReport, width: int = 640, height: int = 400) -> str:
    """Step lengths and distance to the last point against the iteration index, log scale."""
    steps = t.step_lengths
    dist = t.norm.rows(t.points - t.points[-1])
    series = [("step length", steps, "#1f77b4"), ("distance to limit", dist, "#d62728")]
    positive = np.concatenate([s[s > 0] for _, s, _ in series])
    if positive.size == 0:
        positive = np.array([1.0])
    lo, hi = math.floor(math.log10(positive.min())), math.ceil(math.log10(positive.max()))
    hi = max(hi, lo + 1)
    left, right, top, bottom = 70, 20, 20, 50
    n = max(len(steps) - 1, 1)

    def sx(i):
        return left + (width - left - right) * i / n

    def sy(v):
        return top + (height - top - bottom) * (hi - math.log10(v)) / (hi - lo)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">',
             f'<rect x="{left}" y="{top}" width="{width - left - right}" height="{height - top - bottom}" '
             f'fill="none" stroke="#333"/>']
    for e in range(lo, hi + 1):
        y = sy(10.0 ** e)
        parts.append(f'<line x1="{left}" x2="{width - right}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i in np.unique(np.linspace(0, n, min(n, 10) + 1).astype(int)):
        parts.append(f'<text x="{sx(i):.1f}" y="{height - bottom + 16}" text-anchor="middle">{i}</text>')
    parts.append(f'<text x="{(left + width - right) / 2}" y="{height - 12}" text-anchor="middle">iteration</text>')
    for k, (label, values, colour) in enumerate(series):
        pts = [f"{sx(i):.1f},{sy(v):.1f}" for i, v in enumerate(values) if v > 0]
        if pts:
            parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        parts.append(f'<text x="{width - right - 8}" y="{top + 16 + 14 * k}" text-anchor="end" '
                     f'fill="{colour}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> list:
    """Write report.json (plus trajectory.csv and plot.svg when available); return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metadata = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                "version": __version__}
    doc = {"report": _jsonable(result.report), "metadata": metadata}
    written = [out / "report.json"]
    written[0].write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    if result.trajectory is not None:
        (out / "trajectory.csv").write_text(trajectory_csv(result.trajectory))
        written.append(out / "trajectory.csv")
        try:
            (out / "plot.svg").write_text(plot_svg(result.trajectory))
            written.append(out / "plot.svg")
        except Exception:  # plots are a convenience; the report is the contract
            pass
    return written
