import json

import numpy as np
import pytest

from succapprox.errors import ContractViolation, PreconditionError
from succapprox.generators import random_affine_self_map, random_strict_pair, tie_pair
from succapprox.geometry import Box, Norm, sample_uniform
from succapprox.iteration import Choice, IterationParams, iterate
from succapprox.maps import Affine, Constant, FunctionMap, d_infty, extension_margin
from succapprox.pairs import PairMap, pair_H
from succapprox.perturbations import (
    average_identity,
    bump_push,
    fixed_point_distance_bound,
    random_perturbed_pair,
    regularize_pair,
    shadowing_trial,
    shift_toward,
    stability_constants,
)

SQ = Box.cube(2, 0, 1)


def _solve(m):
    return np.linalg.solve(np.eye(m.dim) - m.A, m.b)


def test_shift_toward_formulae():
    f = Affine(0.8 * np.eye(2), [0.1, 0.04])
    phi = shift_toward(f, 0.1, SQ, "L2", delta=0.1 / 1.5)
    assert phi.lipschitz("L2") == pytest.approx((1 - phi.delta) * 0.8)
    xi = _solve(f)
    assert np.linalg.norm(phi(xi) - xi) == pytest.approx(phi.delta * np.linalg.norm(xi - phi.y))
    assert np.linalg.norm(phi(xi) - xi) > 0


def test_shift_toward_rejects_constant_and_bad_delta():
    with pytest.raises(PreconditionError):
        shift_toward(Constant([0.5, 0.5]), 0.1, SQ)
    f = Affine(0.5 * np.eye(2), [0.2, 0.2])
    with pytest.raises(ValueError):
        shift_toward(f, 0.1, SQ, delta=0.5)


@pytest.mark.parametrize("kind", list(Norm))
def test_shift_toward_random(kind, rng):
    for _ in range(30):
        f = random_affine_self_map(SQ, kind, rng)
        eps = float(rng.choice([0.01, 0.05, 0.1]))
        phi = shift_toward(f, eps, SQ, kind, rng_seed=int(rng.integers(1000)))
        assert d_infty(f, phi, SQ, kind).upper < eps
        assert phi.lipschitz(kind) < f.lipschitz(kind)
        # oracle: closed-form fixed point of the affine map delta*y + (1-delta)(Ax+b)
        A, b = (1 - phi.delta) * f.A, phi.delta * phi.y + (1 - phi.delta) * f.b
        eta = np.linalg.solve(np.eye(2) - A, b)
        sep = kind.of(_solve(f) - eta)
        assert 0 < sep < fixed_point_distance_bound(f, phi, eps, kind)


def test_shift_toward_at_centre_uses_random_direction():
    f = Affine(0.5 * np.eye(2), [0.25, 0.25])
    phi = shift_toward(f, 0.05, SQ, "L2", rng_seed=3)
    assert 0 < np.linalg.norm(phi.y - SQ.center) < 0.05


def test_average_identity_examples(rng):
    f = FunctionMap(lambda x: x[::-1], 1.0, 2)
    phi, theta0 = average_identity(f, 2.0, SQ, "L2", t=0.5)
    assert phi.lipschitz("L2") == 1.0 and theta0 == 2.0
    g = Affine(0.5 * np.eye(2), [0.25, 0.25])
    phi, _ = average_identity(g, 0.5, SQ, "L2", t=0.9)
    assert phi.lipschitz("L2") == pytest.approx(0.55)
    for kind in Norm:
        f = random_affine_self_map(SQ, kind, rng)
        phi, theta0 = average_identity(f, 0.05, SQ, kind)
        assert d_infty(f, phi, SQ, kind).upper < 0.05
        X = sample_uniform(SQ, 1000, rng)
        ext = theta0 * phi.apply_many(X) + (1 - theta0) * X
        assert np.allclose(ext, f.apply_many(X), rtol=0, atol=1e-12)
        assert phi.lipschitz(kind) < 1
    with pytest.raises(ValueError):
        average_identity(g, 0.01, SQ, "L2", t=0.5)


@pytest.mark.parametrize("kind", list(Norm))
def test_bump_push_guarantees(kind, rng):
    for _ in range(10):
        f = random_affine_self_map(SQ, kind, rng, need_margin=True)
        theta0 = extension_margin(f, SQ)
        eta, sigma, eps = rng.random(2), float(rng.uniform(0.05, 0.4)), 0.1
        b = bump_push(f, eta, sigma, eps, theta0, kind)
        alpha = min((1 - f.lipschitz(kind)) / 4, eps / (2 * sigma), (theta0 - 1) / (2 * sigma))
        assert b.alpha == pytest.approx(alpha)
        X = sample_uniform(SQ, 5000, rng)
        X = X[kind.rows(X - eta) >= sigma][:1000]
        assert np.array_equal(b.apply_many(X), f.apply_many(X))
        assert b.lipschitz(kind) <= 1 - b.alpha + 1e-15
        iv = d_infty(f, b, SQ, kind)
        assert iv.upper <= sigma * b.alpha < eps
        c = b.gamma_sup
        assert c > 0 and np.allclose(b(eta), f(eta) + c * (f(eta) - eta), rtol=0, atol=1e-15)
        Y = b.apply_many(sample_uniform(SQ, 10_000, rng))
        assert np.all(SQ.distances_to(Y, kind) == 0)


def test_bump_push_preconditions():
    f = Affine(0.5 * np.eye(2), [0.25, 0.25])
    with pytest.raises(PreconditionError):
        bump_push(f, [0.5, 0.5], 0.1, 0.1, None)
    with pytest.raises(ContractViolation):
        bump_push(Affine.identity(2), [0.5, 0.5], 0.1, 0.1, 2.0)


def test_fixed_point_distance_bound_examples():
    f = Affine(0.5 * np.eye(2), [0.25, 0.25])
    assert fixed_point_distance_bound(f, f, 0.1) > 0
    g = FunctionMap(lambda x: x, 0.9, 2)
    h = FunctionMap(lambda x: x, 0.5, 2)
    assert fixed_point_distance_bound(h, g, 0.1) == pytest.approx(0.2)
    with pytest.raises(ContractViolation):
        fixed_point_distance_bound(f, Affine.identity(2), 0.1)


def test_regularize_without_ties_is_identity(rng):
    F = random_strict_pair(SQ, Norm.L2, rng, need_margin=True)
    t = iterate(F, [0.2, 0.9], IterationParams(), SQ)
    assert t.regular
    res = regularize_pair(F.first, F.second, t, 0.05, SQ)
    assert res.phi is F.first and res.psi is F.second and res.touched_indices == []


@pytest.mark.parametrize("kind", list(Norm))
def test_regularize_single_tie(kind, rng):
    for _ in range(10):
        F = tie_pair(SQ, kind, rng)
        t = iterate(F, SQ.center, IterationParams(norm=kind), SQ)
        assert t.steps[0].chosen is Choice.TIE and t.steps[0].taken is Choice.FIRST
        res = regularize_pair(F.first, F.second, t, 0.05, SQ)
        x0 = t.points[0]
        assert res.touched_indices[0] == 0
        assert res.phi is F.first
        assert kind.of(res.psi(x0) - x0) > kind.of(res.phi(x0) - x0)
        assert res.H.upper < 0.05
        assert pair_H(F, res.pair, SQ, kind).upper < 0.05
        # oracle: rerun the regularized pair with the strict tie mode
        redo = iterate(res.pair, x0, IterationParams(norm=kind, branch_rule="fail",
                                                    max_steps=len(t.steps) - 1), SQ)
        assert np.max(np.abs(redo.points - t.points)) <= 1e-12
        assert np.min(redo.gaps) >= res.margin > 0
        X = sample_uniform(SQ, 500, rng)
        far = kind.rows(X - x0) >= res.sigma
        assert np.array_equal(res.psi.apply_many(X[far]), F.second.apply_many(X[far]))
        assert np.array_equal(res.phi.apply_many(X), F.first.apply_many(X))


def test_regularize_needs_margin():
    # f sends (0, 1) to the boundary point (1, 0.5), so no extension beyond theta = 1 exists
    f = Affine([[0.0, 0.5], [0.0, 0.0]], [0.5, 0.5])
    g = Affine(-f.A, 2 * SQ.center - f.b)
    assert extension_margin(f, SQ) is None
    F = PairMap(f, g)
    t = iterate(F, SQ.center, IterationParams(), SQ)
    assert 0 in t.tie_indices
    with pytest.raises(PreconditionError):
        regularize_pair(F.first, F.second, t, 0.05, SQ)
    phi, th_f = average_identity(f, 0.025, SQ)
    psi, th_g = average_identity(g, 0.025, SQ)
    t = iterate(PairMap(phi, psi), SQ.center, IterationParams(), SQ)
    res = regularize_pair(phi, psi, t, 0.025, SQ, th_f, th_g)
    assert pair_H(F, res.pair, SQ).upper < 0.05


def test_stability_constant_formulae():
    # eps0 example: min{0.9/3, 1/2, 0.7}
    assert min(0.9 / 3, 0.5, 0.7) == pytest.approx(0.3)
    # alpha example: min{(1 - 0.5)/2, 0.2/(4*5)}
    assert min((1 - 0.5) / 2, 0.2 / 20) == pytest.approx(0.01)


@pytest.mark.parametrize("kind", list(Norm))
def test_stability_constants_match_recomputation(kind, rng):
    for _ in range(5):
        F = random_strict_pair(SQ, kind, rng)
        t = iterate(F, rng.random(2), IterationParams(norm=kind), SQ)
        c = stability_constants(F.first, F.second, t, SQ)
        limit, other = (F.first, F.second) if c.limit_branch is Choice.FIRST else (F.second, F.first)
        xi = _solve(limit)
        assert kind.of(xi - c.xi) < 1e-10
        eps0 = min(kind.of(other(xi) - xi) / 3, 0.5, d_infty(F.first, F.second, SQ, kind).lower)
        assert c.eps0 == pytest.approx(eps0, rel=1e-9)
        dist = kind.rows(t.points - c.xi)
        N = max([n + 1 for n in range(len(dist)) if dist[n] >= c.eps / 4], default=0)
        assert c.N == N
        gaps = [abs(kind.of(F.first(x) - x) - kind.of(F.second(x) - x)) for x in t.points[:N + 1]]
        assert c.sigma == pytest.approx(min(1.0, min(gaps)))
        lip = max(F.first.lipschitz(kind), F.second.lipschitz(kind))
        expected = (1 - lip) / 2 if N == 0 else min((1 - lip) / 2, c.sigma / (4 * N))
        assert c.alpha == pytest.approx(expected)
        assert json.loads(c.to_json())["alpha"] == c.alpha


def test_stability_preconditions(rng):
    F = tie_pair(SQ, Norm.L2, rng)
    t = iterate(F, SQ.center, IterationParams(), SQ)
    with pytest.raises(PreconditionError):
        stability_constants(F.first, F.second, t, SQ)
    f = Affine(0.5 * np.eye(2), [0.25, 0.25])
    G = PairMap(f, Affine(0.3 * np.eye(2), [0.35, 0.35]))
    t = iterate(G, [0.1, 0.1], IterationParams(), SQ)
    with pytest.raises(PreconditionError):
        stability_constants(G.first, G.second, t, SQ)


@pytest.mark.parametrize("metric", ["H", "h_inf"])
def test_shadowing_trials(metric, rng):
    for _ in range(3):
        F = random_strict_pair(SQ, Norm.L2, rng, need_margin=True)
        t = iterate(F, rng.random(2), IterationParams(), SQ)
        if not t.regular:
            continue
        th = extension_margin(F.first, SQ), extension_margin(F.second, SQ)
        base = stability_constants(F.first, F.second, t, SQ, metric)
        for eps in (base.eps0 / 2, base.eps0 / 10):
            c = stability_constants(F.first, F.second, t, SQ, metric, eps=eps)
            for _ in range(5):
                P = random_perturbed_pair(F.first, F.second, c.alpha * eps, SQ, Norm.L2, rng, *th)
                out = shadowing_trial(F.first, F.second, t, c, P, SQ)
                assert out.distance.upper < c.alpha * eps
                assert out.regular and out.sup_deviation <= eps
