import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from succapprox.errors import ContractViolation, ConvergenceError, DomainError, PreconditionError
from succapprox.geometry import Ball, Box, Norm, sample_uniform
from succapprox.maps import (
    Affine,
    Averaged,
    Bump,
    Constant,
    FunctionMap,
    Shifted,
    certify,
    d_infty,
    evaluate,
    extension_margin,
    fixed_point,
    lipschitz_bound,
    map_from_json,
    map_to_json,
    operator_norm,
    spectral_norm_bound,
    verify_self_map,
)

SQ = Box.cube(2, 0, 1)
SYM = Box.cube(2, -1, 1)


def _svd_norm(A):
    return np.linalg.svd(A, compute_uv=False)[0]


def test_evaluate_examples():
    c = np.array([0.2, 0.3])
    assert np.array_equal(evaluate(Constant(c), [0.9, 0.1]), c)
    x = np.array([0.4, 0.7])
    assert np.allclose(evaluate(Averaged(Affine.identity(2), 0.5), x), x)
    f = Affine(0.5 * np.eye(2), [0.1, 0.1])
    assert np.allclose(evaluate(Shifted(f, [1.0, 0.0], 0.2), x), 0.2 * np.array([1, 0]) + 0.8 * f(x))


def test_evaluate_outside_domain():
    with pytest.raises(DomainError):
        evaluate(Affine.identity(2), [1.5, 0.5], SQ)
    evaluate(Affine.identity(2), [1.0 + 1e-14, 0.5], SQ)


def test_bump_identity_off_ball_and_formula():
    f = Affine([[0.3, 0.1], [0.0, 0.4]], [0.2, 0.3])
    eta, sigma, alpha = np.array([0.5, 0.5]), 0.2, 0.05
    b = Bump(f, eta, sigma, alpha, Norm.L2)
    on_boundary = eta + sigma * np.array([0.6, 0.8])
    assert np.array_equal(b(on_boundary), f(on_boundary))
    # gamma formula written out independently
    x = np.array([0.55, 0.45])
    r = np.linalg.norm(x - eta)
    gamma = max(0.0, sigma - r) * min(alpha, alpha / (np.linalg.norm(f(eta) - eta) + 2 * sigma))
    assert np.allclose(b(x), f(x) + gamma * (f(x) - x), rtol=0, atol=1e-15)
    assert b.gamma_sup == pytest.approx(sigma * alpha * min(1, 1 / (np.linalg.norm(f(eta) - eta) + 2 * sigma)))


def test_bump_requires_strict_base():
    with pytest.raises(PreconditionError):
        Bump(Affine.identity(2), [0.5, 0.5], 0.1, 0.01)
    with pytest.raises(ValueError):
        Bump(Affine(0.5 * np.eye(2), [0, 0]), [0.5, 0.5], 0.0, 0.01)


def test_lipschitz_examples():
    assert lipschitz_bound(Affine(0.5 * np.eye(2), [0, 0]), "L2") == pytest.approx(0.5, rel=1e-12)
    assert lipschitz_bound(Affine([[0.3, 0.2], [0.1, 0.4]], [0, 0]), "Linf") == pytest.approx(0.5)
    assert lipschitz_bound(Affine([[0.3, 0.2], [0.1, 0.4]], [0, 0]), "L1") == pytest.approx(0.6)
    base = FunctionMap(lambda x: 0.8 * x, 0.8, 2)
    assert lipschitz_bound(Shifted(base, [0, 0], 0.1), "L2") == pytest.approx(0.72)
    assert lipschitz_bound(Averaged(Affine(0.5 * np.eye(2), [0, 0]), 0.9), "L2") == pytest.approx(0.55)
    assert lipschitz_bound(Constant([1.0, 2.0]), "L1") == 0.0


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_spectral_norm_certified_against_svd(A):
    # oracle: dense SVD
    try:
        s = spectral_norm_bound(A)
    except ConvergenceError as exc:
        assert exc.partial_bound >= _svd_norm(A) * (1 - 1e-12)
        return
    truth = _svd_norm(A)
    assert s >= truth * (1 - 1e-12)
    assert s <= truth * (1 + 1e-8) + 1e-300


def test_spectral_norm_repeated_singular_values():
    Q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((5, 5)))
    assert spectral_norm_bound(0.7 * Q) == pytest.approx(0.7, rel=1e-9)


@pytest.mark.parametrize("kind", list(Norm))
def test_lipschitz_certificate_soundness(kind, rng):
    for _ in range(10):
        A = rng.uniform(-1, 1, (3, 3))
        m = Affine(A, rng.uniform(-1, 1, 3))
        L = m.lipschitz(kind)
        X, Y = rng.uniform(-1, 1, (1000, 3)), rng.uniform(-1, 1, (1000, 3))
        assert np.all(kind.rows(m.apply_many(X) - m.apply_many(Y)) <= L * kind.rows(X - Y) + 1e-10)


def test_operator_norm_matches_brute_force_linf_l1(rng):
    A = rng.uniform(-1, 1, (3, 3))
    corners = np.array(list(itertools.product((-1, 1), repeat=3)), float)
    assert operator_norm(A, "Linf") == pytest.approx(np.abs(corners @ A.T).max())
    basis = np.eye(3)
    assert operator_norm(A, "L1") == pytest.approx(np.abs(basis @ A.T).sum(axis=1).max())


def test_verify_self_map_examples():
    assert verify_self_map(Affine(0.5 * np.eye(2), [0.25, 0.25]), SQ).kind == "exact"
    assert verify_self_map(Affine(2 * np.eye(2), [0, 0]), SQ).kind == "failed"
    f = Affine(0.5 * np.eye(2), [0.25, 0.25])
    theta0 = extension_margin(f, SQ)
    b = Bump.from_budget(f, [0.5, 0.5], 0.2, 0.1, theta0, Norm.L2)
    check = verify_self_map(b, SQ, "L2", budget=10_000)
    assert check.kind == "monte_carlo" and check.max_violation == 0.0


def test_verify_self_map_on_ball():
    ball = Ball([0, 0], 1.0, Norm.L2)
    assert verify_self_map(Affine(0.5 * np.eye(2), [0.4, 0]), ball).ok
    assert not verify_self_map(Affine(0.5 * np.eye(2), [0.7, 0]), ball).ok


def test_d_infty_examples():
    f = Affine(0.5 * np.eye(2), [0, 0])
    assert d_infty(f, f, SYM, "Linf") == (0.0, 0.0, True)
    g = Affine(0.5 * np.eye(2), [0.1, 0])
    iv = d_infty(f, g, SYM, "Linf")
    assert iv.exact and iv.lower == pytest.approx(0.1)
    h = Affine(0.3 * np.eye(2), [0, 0])
    iv = d_infty(f, h, SYM, "Linf")
    assert iv.exact and iv.lower == pytest.approx(0.2)


@pytest.mark.parametrize("kind", list(Norm))
def test_d_infty_exact_matches_vertex_oracle(kind, rng):
    # oracle: the convex function |Cx + e| attains its max over a box at a vertex
    for _ in range(20):
        f = Affine(rng.uniform(-1, 1, (3, 3)), rng.uniform(-1, 1, 3))
        g = Affine(rng.uniform(-1, 1, (3, 3)), rng.uniform(-1, 1, 3))
        box = Box([-1, 0, 2], [1, 0.5, 3])
        V = np.array(list(itertools.product(*zip(box.lower, box.upper))))
        truth = kind.rows(f.apply_many(V) - g.apply_many(V)).max()
        iv = d_infty(f, g, box, kind)
        assert iv.exact and iv.lower == pytest.approx(truth, rel=1e-12)


@pytest.mark.parametrize("kind", list(Norm))
def test_sampled_enclosures_contain_exact_value(kind, rng):
    for _ in range(10):
        f = Affine(rng.uniform(-0.5, 0.5, (2, 2)), rng.uniform(0, 0.5, 2))
        g = Affine(rng.uniform(-0.5, 0.5, (2, 2)), rng.uniform(0, 0.5, 2))
        exact = d_infty(f, g, SQ, kind).lower
        for budget in (4, 64, 1024):
            iv = d_infty(f, g, SQ, kind, budget=budget, method="sample")
            assert iv.lower <= exact + 1e-12 <= iv.upper + 2e-12


def test_d_infty_wrappers_have_certified_upper_bounds(rng):
    f = Affine([[0.4, 0.1], [-0.2, 0.3]], [0.3, 0.3])
    for kind in Norm:
        phi = Shifted(f, [0.9, 0.1], 0.05)
        iv = d_infty(f, phi, SQ, kind)
        X = sample_uniform(SQ, 5000, rng)
        brute = kind.rows(f.apply_many(X) - phi.apply_many(X)).max()
        assert brute <= iv.upper + 1e-12
        theta0 = extension_margin(f, SQ)
        b = Bump.from_budget(f, [0.5, 0.5], 0.3, 0.1, theta0, kind)
        iv = d_infty(f, b, SQ, kind)
        brute = kind.rows(f.apply_many(X) - b.apply_many(X)).max()
        assert brute <= iv.upper + 1e-12
        assert iv.upper <= b.sigma * b.alpha + 1e-15


def test_d_infty_rejects_zero_budget():
    f = Affine(0.5 * np.eye(2), [0, 0])
    with pytest.raises(ValueError):
        d_infty(f, Constant([0, 0]), SQ, budget=0)


def test_fixed_point_examples():
    x = fixed_point(Affine(0.5 * np.eye(2), [0.25, 0]), SQ, "L2")
    assert np.allclose(x, [0.5, 0], atol=1e-12)
    assert np.array_equal(fixed_point(Constant([0.3, 0.4]), SQ), [0.3, 0.4])
    A, b = np.array([[0.3, 0.2], [0.1, 0.4]]), np.array([0.1, 0.2])
    x = fixed_point(Affine(A, b), SQ, "Linf", tol=1e-13)
    assert np.allclose(x, np.linalg.solve(np.eye(2) - A, b), atol=1e-13)


def test_fixed_point_requires_contraction():
    with pytest.raises(ContractViolation):
        fixed_point(Affine.identity(2), SQ)


@pytest.mark.parametrize("m", [
    Affine([[0.3, 0.2], [0.1, 0.4]], [0.1, 0.2]),
    Constant([0.5, 0.25]),
    Averaged(Affine([[0.3, 0.2], [0.1, 0.4]], [0.1, 0.2]), 0.7),
    Shifted(Constant([0.1, 0.1]), [0.2, 0.9], 0.3),
    Bump(Affine([[0.3, 0.2], [0.1, 0.4]], [0.1, 0.2]), [0.5, 0.5], 0.2, 0.01, Norm.L1),
])
def test_json_round_trip_is_lossless(m, rng):
    text = map_to_json(m)
    back = map_from_json(text)
    assert map_to_json(back) == text
    X = rng.random((50, 2))
    assert np.array_equal(back.apply_many(X), m.apply_many(X))
    assert json.loads(text)["variant"] in ("affine", "constant", "averaged", "shifted", "bump")


def test_function_map_is_not_serializable():
    with pytest.raises(TypeError):
        map_to_json(FunctionMap(np.sin, 1.0, 2))


def test_unknown_variant():
    with pytest.raises(ValueError):
        map_from_json('{"variant": "spline"}')


def test_certify_records_margin_for_averaged():
    f = Affine(0.5 * np.eye(2), [0.25, 0.25])
    cert = certify(Averaged(f, 0.8), SQ, "L2")
    assert cert.theta0 == pytest.approx(1.25)
    assert cert.strict and cert.self_map.kind == "exact"


def test_extension_margin_matches_direct_check(rng):
    f = Affine([[0.4, 0.1], [-0.2, 0.3]], [0.3, 0.3])
    theta = extension_margin(f, SQ)
    assert theta > 1
    X = sample_uniform(SQ, 3000, rng)
    inside = theta * f.apply_many(X) + (1 - theta) * X
    assert np.all(SQ.distances_to(inside, Norm.LINF) <= 1e-12)
    V = np.array(list(itertools.product((0, 1), repeat=2)), float)
    beyond = (theta * 1.001) * f.apply_many(V) + (1 - theta * 1.001) * V
    assert np.any(SQ.distances_to(beyond, Norm.LINF) > 0)
