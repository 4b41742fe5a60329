import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from accmd.errors import ConfigurationError, DomainError
from accmd.linalg import DiagonalMatrix
from accmd.mirror import (
    EntropyMirror,
    QuadraticMirror,
    QuarticMirror,
    bregman,
    composite_prox,
    mirror_prox,
    prox_kkt_residual,
    quartic_grad_conjugate,
    soft_threshold,
)
from accmd.nonsmooth import NonsmoothTerm

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
positive = st.floats(0.01, 5, allow_nan=False, allow_infinity=False)


def mirrors(dim=3):
    rng = np.random.default_rng(2)
    M = rng.standard_normal((dim, dim))
    return [
        QuadraticMirror.identity(dim),
        QuadraticMirror(DiagonalMatrix([1.0, 2.0, 5.0][:dim])),
        QuadraticMirror(np.eye(dim) + M @ M.T),
        EntropyMirror(dim),
        QuarticMirror(dim),
    ]


@settings(max_examples=60, deadline=None)
@given(st.lists(positive, min_size=3, max_size=3), st.lists(positive, min_size=3, max_size=3))
def test_roundtrip_and_divergence_sign(xs, ys):
    x, y = np.array(xs), np.array(ys)
    for phi in mirrors():
        back = phi.grad_conjugate(phi.grad(x))
        assert np.linalg.norm(back - x) <= 1e-10 * max(1.0, np.linalg.norm(x))
        assert phi.bregman(x, x) == pytest.approx(0.0, abs=1e-12)
        if not np.allclose(x, y):
            assert phi.bregman(x, y) > 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(positive, min_size=3, max_size=3), min_size=3, max_size=3))
def test_three_point_identity(pts):
    x, y, z = (np.array(p) for p in pts)
    for phi in mirrors():
        lhs = float(np.dot(phi.grad(y) - phi.grad(x), y - z))
        rhs = phi.bregman(y, x) + phi.bregman(z, y) - phi.bregman(z, x)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs), abs(rhs))


def test_bregman_examples():
    phi = QuadraticMirror.identity(2)
    assert bregman(phi, [1.0, 0.0], [0.0, 0.0]) == pytest.approx(0.5)
    ent = EntropyMirror(2)
    oracle = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    assert bregman(ent, [0.5, 0.5], [0.25, 0.75]) == pytest.approx(oracle, rel=1e-14)


def test_entropy_domain_errors():
    ent = EntropyMirror(2)
    with pytest.raises(DomainError):
        ent.grad([0.0, 1.0])
    with pytest.raises(DomainError):
        bregman(ent, [0.5, 0.5], [0.0, 1.0])
    with pytest.raises(DomainError):
        ent.value([-0.1, 1.1])
    # the first slot extends to the boundary with 0 log 0 = 0
    assert ent.bregman([0.0, 1.0], [0.5, 0.5]) == pytest.approx(math.log(2.0), rel=1e-14)


def test_conjugate_symmetry():
    for phi in mirrors():
        x = np.array([0.3, 1.2, 0.7])
        y = np.array([0.9, 0.4, 2.0])
        lhs = phi.bregman(x, y)
        rhs = phi.bregman_conjugate(phi.grad(y), phi.grad(x))
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_simplex_entropy_conjugate_is_softmax():
    ent = EntropyMirror(3, simplex=True)
    chi = np.array([0.2, -1.0, 3.0])
    y = ent.grad_conjugate(chi)
    assert y.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(y, np.exp(chi) / np.exp(chi).sum(), rtol=1e-14)


def test_quartic_grad_conjugate_examples():
    assert np.allclose(quartic_grad_conjugate([2.0, 0.0]), [1.0, 0.0], atol=1e-14)
    assert np.allclose(quartic_grad_conjugate([10.0, 0.0, 0.0]), [2.0, 0.0, 0.0], atol=1e-13)
    assert np.array_equal(quartic_grad_conjugate(np.zeros(3)), np.zeros(3))
    phi = QuarticMirror(4)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.standard_normal(4) * rng.uniform(0.01, 30)
        assert np.linalg.norm(phi.grad_conjugate(phi.grad(x)) - x) <= 1e-10 * max(1.0, np.linalg.norm(x))


def test_mirror_prox_examples():
    phi = QuadraticMirror.identity(2)
    assert np.array_equal(mirror_prox(phi, 0.0, [2.0, 4.0]), [2.0, 4.0])
    assert np.allclose(mirror_prox(phi, 1.0, [2.0, 4.0]), [1.0, 2.0])
    ent = EntropyMirror(3)
    z = np.array([0.2, 1.5, 0.7])
    assert np.allclose(mirror_prox(ent, 0.5, ent.grad(z) * 1.5), z, rtol=1e-14)
    with pytest.raises(ConfigurationError):
        mirror_prox(phi, -1.0, [1.0, 1.0])


def test_composite_prox_examples():
    D1 = QuadraticMirror(DiagonalMatrix([1.0]))
    l1 = NonsmoothTerm.l1(1.0)
    assert np.array_equal(composite_prox(D1, 0.3, 1.0, [0.0], l1), [0.0])
    assert composite_prox(D1, 1.0, 2.0, [5.0], l1) == pytest.approx([1.5])
    ent = EntropyMirror(3, simplex=True)
    for c in (-4.0, 0.0, 7.5):
        y = composite_prox(ent, 0.2, 1.0, [c, c, c], NonsmoothTerm.simplex())
        assert np.allclose(y, 1.0 / 3.0, atol=1e-15)
    with pytest.raises(ConfigurationError):
        composite_prox(ent, 0.2, 1.0, [1.0, 2.0, 3.0], NonsmoothTerm.l1(0.1))
    with pytest.raises(ConfigurationError):
        composite_prox(QuarticMirror(2), 0.2, 1.0, [1.0, 2.0], NonsmoothTerm.simplex())


def test_soft_threshold():
    assert np.array_equal(soft_threshold([3.0, -0.5, -2.0], 1.0), [2.0, 0.0, -1.0])


def _l1_oracle(D, alpha, beta_lam, h):
    # y = u - v with u, v >= 0 turns the l1 prox into a smooth bound-constrained problem
    n = h.size

    def obj(w):
        u, v = w[:n], w[n:]
        y = u - v
        val = 0.5 * (1 + alpha) * np.dot(D * y, y) + beta_lam * (u.sum() + v.sum()) - np.dot(h, y)
        gy = (1 + alpha) * D * y - h
        return val, np.concatenate([gy + beta_lam, -gy + beta_lam])

    res = minimize(obj, np.zeros(2 * n), jac=True, method="L-BFGS-B", bounds=[(0, None)] * (2 * n),
                   options={"ftol": 1e-16, "gtol": 1e-13, "maxiter": 10_000})
    return res.x[:n] - res.x[n:]


def _simplex_oracle(alpha, h):
    # projected Newton in the tangent space of the simplex on the interior
    n = h.size
    y = np.full(n, 1.0 / n)
    for _ in range(100):
        grad = (1 + alpha) * (np.log(y) + 1) - h
        H = (1 + alpha) / y
        # Newton step restricted to sum(d) = 0
        lam = np.sum(grad / H) / np.sum(1.0 / H)
        d = -(grad - lam) / H
        t = 1.0
        while np.any(y + t * d <= 0):
            t *= 0.5
        y = y + t * d
        if np.linalg.norm(d) < 1e-16:
            break
    return y


def test_composite_prox_matches_inner_solver_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        Dd = rng.uniform(0.5, 3.0, 6)
        h = rng.standard_normal(6) * 2
        alpha, beta = rng.uniform(0, 1), rng.uniform(0.1, 1)
        y = composite_prox(QuadraticMirror(DiagonalMatrix(Dd)), alpha, beta, h, NonsmoothTerm.l1(0.7))
        assert np.abs(y - _l1_oracle(Dd, alpha, beta * 0.7, h)).max() <= 1e-8
        hs = rng.standard_normal(5)
        ys = composite_prox(EntropyMirror(5, simplex=True), alpha, beta, hs, NonsmoothTerm.simplex())
        assert np.abs(ys - _simplex_oracle(alpha, hs)).max() <= 1e-8


def test_prox_kkt_residual_small_at_solution():
    phi = QuadraticMirror(DiagonalMatrix([1.0, 2.0, 0.5]))
    h = np.array([1.0, -0.05, -3.0])
    g = NonsmoothTerm.l1(0.2)
    y = composite_prox(phi, 0.4, 1.0, h, g)
    assert prox_kkt_residual(phi, 0.4, 1.0, h, g, y) <= 1e-12
    assert prox_kkt_residual(phi, 0.4, 1.0, h, g, y + 0.1) > 1e-3
