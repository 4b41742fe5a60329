import math

import numpy as np
import pytest

from accmd.certify import check_relative_bounds, finite_diff_grad
from accmd.errors import ConfigurationError, DimensionError, DomainError, ParseError
from accmd.linalg import DiagonalMatrix
from accmd.mirror import QuadraticMirror
from accmd.objective import (
    LeastSquaresObjective,
    estimate_gcs,
    load_dataset,
    make_counterexample_1d,
    make_lasso,
    make_lasso_random,
    make_log_linear,
    make_log_linear_random,
    make_max_margin,
    make_max_margin_random,
    make_quartic,
    practical_gcs,
    save_dataset,
)


def test_log_linear_constants():
    p = make_log_linear([3.0, 4.0])
    assert p.gcs.value == pytest.approx(25.0)
    assert p.f.mu == 1.0 and p.f.L == pytest.approx(17.0)
    assert estimate_gcs(p.f, "global-L").value == pytest.approx(17.0)
    assert p.f.power_gcs() == pytest.approx(25.0, rel=1e-8)


def test_log_linear_relative_bounds_on_simplex_pairs():
    p = make_log_linear_random(64, 7)
    assert check_relative_bounds(p, samples=1000, seed=7).passed


def test_log_linear_stationary_point_is_stationary():
    p = make_log_linear_random(12, 4)
    x = p.f.stationary_point()
    assert x.sum() == pytest.approx(1.0, abs=1e-14)
    g = p.f.grad(x)
    assert np.ptp(g) <= 1e-12


def test_log_linear_rejects_zero_vector():
    with pytest.raises(ConfigurationError):
        make_log_linear([0.0, 0.0])


def test_max_margin_constants():
    assert make_max_margin(np.diag([1.0, 2.0, 3.0]), np.zeros(3)).gcs.value == pytest.approx(3.0, rel=1e-10)
    assert make_max_margin(np.eye(4), np.arange(4.0)).gcs.value == pytest.approx(1.0, rel=1e-10)
    p = make_max_margin_random(20, 9)
    assert abs(p.gcs.value - np.linalg.eigvalsh(p.f.A)[-1]) <= 1e-6
    assert p.f.mu == 0.0
    with pytest.raises(ConfigurationError):
        make_max_margin(np.diag([1.0, -1.0]), np.zeros(2))


def test_quartic_construction():
    p = make_quartic(32, 0)
    assert abs(p.f.mu - 1.0) < 1e-3
    assert p.gcs.value == p.f.L
    d = p.data
    assert np.allclose(p.f.grad(np.zeros(32)), -d["C"].T @ d["d"], atol=1e-13)


def test_quartic_gradient_matches_central_differences():
    p = make_quartic(16, 3)
    rng = np.random.default_rng(21)
    for _ in range(20):
        x = rng.standard_normal(16) * 0.5
        fd = finite_diff_grad(p.f.value, x, h=1e-5)
        an = p.f.grad(x)
        assert np.linalg.norm(fd - an) <= 1e-6 * max(1.0, np.linalg.norm(an))


def test_quartic_is_deterministic():
    a, b = make_quartic(8, 5), make_quartic(8, 5)
    for k in a.data:
        assert np.array_equal(a.data[k], b.data[k])
    assert a.f.L == b.f.L and a.f.mu == b.f.mu


def test_lasso_constants():
    p = make_lasso(np.eye(5), np.ones(5))
    assert np.array_equal(p.f.D.diagonal, np.ones(5))
    assert p.gcs.value == pytest.approx(1.0, rel=1e-10)
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 6)))
    p = make_lasso(2.0 * Q, np.ones(6))
    assert p.gcs.value == pytest.approx(1.0, rel=1e-8)
    assert p.f.exact_gcs() == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ConfigurationError):
        make_lasso(np.array([[1.0, 0.0], [2.0, 0.0]]), np.ones(2))
    with pytest.raises(ConfigurationError):
        make_lasso(np.eye(2), np.ones(2), lam=0.0)
    with pytest.raises(DimensionError):
        LeastSquaresObjective(np.eye(3), np.ones(2))


def test_lasso_default_lambda():
    p = make_lasso_random(10, 30, 0)
    assert p.g.lam == 0.05


def test_counterexample_branches():
    p = make_counterexample_1d()
    f = p.f
    below = 2.0 * 1.0 * math.log(1.0)
    above = 1.0 * math.log(1.0) + 2.0 - math.log(1.0) - 2.0
    assert f.value([1.0]) == below == above == 0.0
    assert f.grad([1.0 - 1e-12])[0] == pytest.approx(2.0, abs=1e-10)
    assert f.grad([1.0 + 1e-12])[0] == pytest.approx(2.0, abs=1e-10)
    assert f.grad([math.exp(-1.0)])[0] == pytest.approx(0.0, abs=1e-15)
    assert f.shifted_bregman(np.array([1e-8]), np.array([1.0])) == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(DomainError):
        f.value([0.0])
    with pytest.raises(DomainError):
        f.grad([-1.0])


def test_counterexample_relative_constants():
    assert check_relative_bounds(make_counterexample_1d(), samples=1000, seed=1).passed


def test_estimate_gcs_practical():
    f = make_log_linear([3.0, 4.0]).f
    est = estimate_gcs(f, "practical-adaptive", theta=1.0, gap=0.0, hess_lipschitz=5.0)
    assert est.value == pytest.approx(f.L - f.mu)
    assert est.at_gap(f, 0.5) == pytest.approx((f.L - f.mu) * (1 + 5.0 * 0.5))
    ls = make_lasso(np.diag([1.0, 3.0]), np.ones(2)).f
    assert isinstance(ls.mirror, QuadraticMirror)
    for gap in (0.0, 0.3, 10.0):
        assert practical_gcs(ls, gap=gap, theta=0.5) == pytest.approx(ls.L - ls.mu)
    with pytest.raises(ConfigurationError):
        estimate_gcs(f, "practical-adaptive", theta=1.0)
    with pytest.raises(ConfigurationError):
        estimate_gcs(f, "practical-adaptive", theta=1.0, gap=0.1)
    with pytest.raises(ConfigurationError):
        estimate_gcs(f, "bogus")


def test_load_csv_fixture(fixtures_dir):
    A, b = load_dataset(fixtures_dir / "tiny.csv")
    assert A.shape == (3, 2) and b.shape == (3,)
    assert np.array_equal(b, [1.0, -0.25, 3.0])
    assert A[1, 0] == 1e-3


def test_load_svmlight(fixtures_dir):
    A, b = load_dataset(fixtures_dir / "tiny.svm", fmt="svmlight", dim=4)
    assert np.array_equal(A[0], [0.0, 0.0, 0.5, 0.0])
    assert np.array_equal(A[1], [2.0, 0.0, 0.0, -1.0])
    assert np.array_equal(b, [1.0, -1.0])
    A2, _ = load_dataset(fixtures_dir / "tiny.svm", fmt="svmlight")
    assert A2.shape == (2, 4)


def test_parse_errors_carry_line_numbers(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("b,f1\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as err:
        load_dataset(bad)
    assert err.value.line == 3 and "line 3" in str(err.value)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n")
    with pytest.raises(ParseError) as err:
        load_dataset(ragged)
    assert err.value.line == 2
    svm = tmp_path / "bad.svm"
    svm.write_text("1 1:2\n1 5:1\n")
    with pytest.raises(ParseError) as err:
        load_dataset(svm, fmt="svmlight", dim=4)
    assert err.value.line == 2


@pytest.mark.parametrize("fmt", ["csv", "svmlight"])
def test_dataset_round_trip_is_bitwise(tmp_path, fmt):
    rng = np.random.default_rng(10)
    A = rng.standard_normal((10, 20))
    b = rng.standard_normal(10)
    path = tmp_path / f"d.{fmt}"
    save_dataset(path, A, b, fmt=fmt)
    A2, b2 = load_dataset(path, fmt=fmt, dim=20)
    assert np.array_equal(A, A2) and np.array_equal(b, b2)


def test_problem_metadata_and_initial_point():
    p = make_log_linear([1.0, 2.0, 3.0])
    assert np.allclose(p.initial_point(), 1.0 / 3.0)
    meta = p.metadata()
    assert meta["C"] == pytest.approx(14.0) and meta["nonsmooth"]
    q = make_lasso(np.eye(3), np.ones(3))
    assert np.array_equal(q.initial_point(), np.zeros(3))
    assert q.objective(np.zeros(3)) == pytest.approx(1.5)
