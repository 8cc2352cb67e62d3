import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cordes_fpk import coefficients as cf
from cordes_fpk.coefficients import (
    CoefficientEvaluationError,
    CoefficientField,
    EllipticityError,
    check_cordes,
    check_cordes_lower_order,
    eval_gamma,
)

PI2 = math.pi**2


def const_field(A, b=None, c=None):
    A = np.array(A, dtype=float)
    n = A.shape[0]
    bf = None if b is None else (lambda x: np.broadcast_to(np.array(b, float), (len(x), n)))
    cfn = None if c is None else (lambda x: np.full(len(x), float(c)))
    return CoefficientField(n, lambda x: np.broadcast_to(A, (len(x), n, n)), bf, cfn)


@pytest.fixture
def samples2():
    return cf.default_samples(2, cells=4)


@pytest.mark.parametrize(
    "A, b, expected",
    [
        (np.eye(2), None, 1.0),
        (2 * np.eye(2), None, 0.5),
        (np.eye(2), [1.0, 0.0], 2.0 / 3.0),
    ],
)
def test_eval_gamma(A, b, expected):
    x = np.random.default_rng(1).random((5, 2))
    np.testing.assert_allclose(eval_gamma(const_field(A, b), x), expected, rtol=1e-15)


def test_eval_gamma_reports_point_of_nonfinite_value():
    field = CoefficientField(2, lambda x: np.where((x[:, 0] > 0.5)[:, None, None], np.nan, 1.0) * np.eye(2))
    with pytest.raises(CoefficientEvaluationError) as info:
        eval_gamma(field, [[0.1, 0.2], [0.7, 0.3]])
    np.testing.assert_array_equal(info.value.point, [0.7, 0.3])


def test_cordes_identity_2d(samples2):
    rep = check_cordes(const_field(np.eye(2)), "periodic", samples2)
    assert rep.delta_star == 1.0
    assert rep.eta == 0 and rep.delta_threshold == 0.0
    assert rep.nearness_const == 1.0
    assert rep.passed


def test_cordes_identity_3d():
    rep = check_cordes(const_field(np.eye(3)), "periodic", cf.default_samples(3, cells=2))
    assert rep.delta_star == pytest.approx(1.0, abs=1e-15)
    assert rep.passed


def test_cordes_unit_drift():
    rep = check_cordes(const_field(np.eye(2), [1.0, 0.0]), "periodic")
    d0 = 1 / (1 + 4 * PI2)
    assert rep.delta_star == pytest.approx(1 / 3, abs=1e-14)
    assert rep.eta == 1
    assert rep.delta_threshold == pytest.approx(d0, abs=1e-15)
    assert rep.delta_threshold == pytest.approx(0.024705, abs=5e-7)
    assert rep.nearness_const == pytest.approx((1 / 3 - d0) * (1 + 1 / (4 * PI2)), abs=1e-14)
    assert rep.nearness_const == pytest.approx(0.3164, abs=1e-4)
    assert rep.passed


def test_cordes_dirichlet_threshold_and_kappa():
    rep = check_cordes(const_field(np.eye(2), [1.0, 0.0]), "dirichlet")
    d0 = 1 / (1 + PI2)
    assert rep.delta_threshold == pytest.approx(d0, abs=1e-15)
    assert rep.nearness_const == pytest.approx((1 / 3 - d0) * (1 + 1 / PI2), abs=1e-14)


def test_cordes_fails_for_large_drift():
    # |b|^2 = 3: ratio 4/5 - 1 < 0
    rep = check_cordes(const_field(np.eye(2), [math.sqrt(3), 0.0]), "periodic")
    assert not rep.passed
    assert rep.delta_star == pytest.approx(-0.2, abs=1e-14)


def test_cordes_errors():
    with pytest.raises(ValueError, match="empty"):
        check_cordes(const_field(np.eye(2)), "periodic", np.empty((0, 2)))
    with pytest.raises(EllipticityError):
        check_cordes(const_field([[1.0, 2.0], [2.0, 1.0]]), "periodic")
    with pytest.raises(EllipticityError, match="symmetric"):
        check_cordes(const_field([[1.0, 0.5], [0.0, 1.0]]), "periodic")
    with pytest.raises(ValueError, match="setting"):
        check_cordes(const_field(np.eye(2)), "neumann")


@pytest.mark.parametrize(
    "n, c_over_lambda, expected, passed",
    [(2, 1.0, 1.0, True), (2, 0.0, 0.0, False), (3, 1.0, 1.0, True)],
)
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_lower_order_examples(n, c_over_lambda, expected, passed, lam):
    rep = check_cordes_lower_order(const_field(np.eye(n), c=c_over_lambda * lam), lam, cf.default_samples(n, cells=2))
    assert rep.delta_star == pytest.approx(expected, abs=1e-14)
    assert rep.passed is passed
    assert rep.setting == "lower_order" and rep.lambda_shift == lam
    assert rep.consequence_ok
    # s = (tr A + c/lam) / (|A|^2 + c^2/lam^2)
    s_expected = (n + c_over_lambda) / (n + c_over_lambda**2)
    np.testing.assert_allclose(rep.renormalization, s_expected, rtol=1e-14)


def test_lower_order_errors():
    with pytest.raises(ValueError, match="reaction"):
        check_cordes_lower_order(const_field(np.eye(2)), 1.0)
    with pytest.raises(ValueError, match="positive"):
        check_cordes_lower_order(const_field(np.eye(2), c=1.0), 0.0)


# -- properties over random coefficient fields -----------------------------


def random_field(seed: int, dim: int, drift: float):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(dim, dim))
    base = M @ M.T + dim * np.eye(dim)
    k = rng.normal(size=(dim,))

    def A(x):
        s = 1.0 + 0.3 * np.sin(2 * np.pi * x @ k)
        return s[:, None, None] * base + 0.2 * np.cos(2 * np.pi * x[:, :1, None]) * np.eye(dim)

    def b(x):
        return drift * np.stack([np.sin(2 * np.pi * x[:, i]) for i in range(dim)], axis=1)

    return CoefficientField(dim, A, b)


field_params = st.tuples(st.integers(0, 10_000), st.sampled_from([2, 3]), st.floats(0.0, 0.8))


@settings(max_examples=30, deadline=None)
@given(field_params)
def test_pointwise_consequence_and_cone(params):
    seed, dim, drift = params
    field = random_field(seed, dim, drift)
    x = cf.default_samples(dim, cells=3)
    rep = check_cordes(field, "periodic", x)
    A, b = field.eval_A(x), field.eval_b(x)
    g = eval_gamma(field, x)
    lhs = np.sum((np.eye(dim) - g[:, None, None] * A) ** 2, axis=(1, 2)) + np.sum((g[:, None] * b) ** 2, axis=1)
    assert np.all(lhs <= 1 - rep.delta_star + 1e-10)
    assert rep.consequence_ok
    if rep.passed:
        assert math.cos(rep.max_cone_angle) >= math.sqrt(1 - (1 - rep.delta_star) / dim) - 1e-12
        assert 0 < rep.nearness_const <= 1


@settings(max_examples=30, deadline=None)
@given(field_params, st.sampled_from([0.5, 3.0]))
def test_delta_star_scale_invariant(params, t):
    seed, dim, drift = params
    field = random_field(seed, dim, drift)
    x = cf.default_samples(dim, cells=3)
    d1 = check_cordes(field, "periodic", x).delta_star
    d2 = check_cordes(field.scaled(t), "periodic", x).delta_star
    assert d2 == pytest.approx(d1, rel=1e-12, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_no_drift_settings_agree(seed, dim):
    field = random_field(seed, dim, 0.0)
    x = cf.default_samples(dim, cells=2)
    per = check_cordes(field, "periodic", x)
    dirich = check_cordes(field, "dirichlet", x)
    assert per.eta == dirich.eta == 0
    assert per.delta_threshold == dirich.delta_threshold == 0
    assert per.nearness_const == dirich.nearness_const == per.delta_star


def test_cone_angle_2x2_example():
    # eigenvalues (1, 3): cos(theta) = 4 / (sqrt(10) sqrt(2))
    rep = check_cordes(const_field(np.diag([1.0, 3.0])), "periodic")
    assert rep.max_cone_angle == pytest.approx(math.acos(4 / math.sqrt(20)), abs=1e-14)
    assert rep.ell_lower == 1.0 and rep.ell_upper == 3.0


# -- families ---------------------------------------------------------------


def test_trig_drift_analytic_delta():
    field = cf.trig_drift(0.15)
    rep = check_cordes(field, "periodic")
    bmax2 = (0.3 * math.pi) ** 2
    assert bmax2 == pytest.approx(0.888, abs=1e-3)
    assert rep.delta_star == pytest.approx(4 / (2 + bmax2) - 1, abs=1e-14)
    assert rep.delta_star == pytest.approx(0.385, abs=1e-3)
    assert rep.delta_star_raw >= rep.delta_star


def test_trig_drift_is_gradient_of_potential():
    field = cf.trig_drift(0.2, 3)
    V = field.params["V"]
    x = np.random.default_rng(3).random((20, 3))
    eps = 1e-6
    fd = np.stack([(V(x + eps * e) - V(x - eps * e)) / (2 * eps) for e in np.eye(3)], axis=1)
    np.testing.assert_allclose(field.eval_b(x), fd, atol=1e-8)


def test_checkerboard_patterns():
    board = cf.checkerboard((1.0, 2.0))
    halves = cf.checkerboard((1.0, 2.0), split_axis=1)
    x = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    np.testing.assert_array_equal(board.eval_A(x)[:, 0, 0], [1, 2, 2, 1])
    np.testing.assert_array_equal(halves.eval_A(x)[:, 0, 0], [1, 2, 1, 2])


def test_layered_profile():
    field = cf.layered([1.0, 2.0, 4.0])
    x = np.array([[0.1, 0.9], [0.5, 0.1], [0.9, 0.5]])
    np.testing.assert_array_equal(field.eval_A(x)[:, 1, 1], [1, 2, 4])
    assert field.alignment == 3


def test_table_family(tmp_path):
    path = tmp_path / "coef.csv"
    rows = ["i,j,a11,a12,a22,b1,b2"]
    for i in range(2):
        for j in range(2):
            rows.append(f"{i},{j},{1 + i},{0.1 * j},{1 + j},{0.5 * i},0")
    path.write_text("\n".join(rows) + "\n")
    field = cf.table(path)
    A = field.eval_A([[0.75, 0.25], [0.25, 0.75]])
    np.testing.assert_allclose(A[0], [[2, 0], [0, 1]])
    np.testing.assert_allclose(A[1], [[1, 0.1], [0.1, 2]])
    np.testing.assert_allclose(field.eval_b([[0.75, 0.25]]), [[0.5, 0]])
    assert field.alignment == 2 and field.analytic_eta == 1


def test_table_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("i,j,a11,a22,b1,b2\n0,0,1,1,0,0\n")
    with pytest.raises(ValueError, match="header"):
        cf.table(path)


def test_table_3d_header(tmp_path):
    path = tmp_path / "c3.csv"
    lines = ["i,j,k,a11,a12,a13,a22,a23,a33,b1,b2,b3"]
    lines += [f"{i},{j},{k},1,0,0,1,0,1,0,0,0" for i in range(2) for j in range(2) for k in range(2)]
    path.write_text("\n".join(lines))
    field = cf.table(path)
    assert field.dim == 3 and field.b is None
    assert check_cordes(field, "periodic", cf.default_samples(3, 2)).delta_star == 1.0


def test_manufactured_source_consistent():
    A = np.array([[1.0, 0.1], [0.1, 1.0]])
    b = np.array([0.2, 0.0])
    field = cf.manufactured_dirichlet(A, b)
    x = np.random.default_rng(0).random((30, 2))
    eps = 1e-5
    # -div F by central differences must equal f
    div = sum(
        (field.eval_F(x + eps * e)[:, i] - field.eval_F(x - eps * e)[:, i]) / (2 * eps) for i, e in enumerate(np.eye(2))
    )
    np.testing.assert_allclose(-div, field.eval_f(x), atol=1e-7)
