import math

import numpy as np
import pytest
from scipy.special import comb, i0

from cordes_fpk import coefficients as cf
from cordes_fpk.grid_fem import composite_points
from cordes_fpk.oracle import (
    dirichlet_battery,
    exact_dirichlet,
    exact_periodic_gradient_drift,
    exact_periodic_scalar_diffusion,
    l2_error,
    miranda_talenti_check,
    periodic_battery,
    weak_residual,
)
from cordes_fpk.problems import periodic_oracle


def zero(x):
    return np.zeros(len(x))


def test_flat_potential_gives_unit_density():
    u = exact_periodic_gradient_drift(zero)
    assert u.normalization == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(u(np.random.default_rng(0).random((5, 2))), 1.0, atol=1e-14)


def test_sine_product_partition_function_series():
    # int exp(a sin(2 pi x) sin(2 pi y)) = sum_k a^2k/(2k)! (C(2k,k)/4^k)^2
    alpha = 0.15
    V = lambda x: alpha * np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])
    series = sum(alpha ** (2 * k) / math.factorial(2 * k) * (comb(2 * k, k) / 4**k) ** 2 for k in range(12))
    assert exact_periodic_gradient_drift(V).normalization == pytest.approx(series, rel=1e-13)


def test_cosine_potential_bessel():
    V = lambda x: 0.1 * np.cos(2 * np.pi * x[:, 0])
    assert exact_periodic_gradient_drift(V).normalization == pytest.approx(i0(0.1), rel=1e-13)


def test_low_order_rule_rejected():
    with pytest.raises(ValueError):
        exact_periodic_gradient_drift(zero, order=4)


def test_checkerboard_scalar_diffusion():
    a = cf.checkerboard((1.0, 2.0)).params["a"]
    u = exact_periodic_scalar_diffusion(a)
    assert u.normalization == pytest.approx(0.75, abs=1e-14)
    vals = u(np.array([[0.25, 0.25], [0.75, 0.25]]))
    assert sorted(vals) == pytest.approx([2 / 3, 4 / 3], abs=1e-14)


def test_smooth_scalar_diffusion():
    a = lambda x: 2 + np.sin(2 * np.pi * x[:, 0])
    u = exact_periodic_scalar_diffusion(a)
    # int_0^1 dx / (2 + sin 2 pi x) = 1/sqrt(3)
    assert u.normalization == pytest.approx(1 / math.sqrt(3), rel=1e-9)
    pts, w = composite_points(2, 8, 8)
    assert w @ u(pts) == pytest.approx(1.0, rel=1e-12)


def test_scalar_diffusion_rejects_nonpositive():
    with pytest.raises(ValueError):
        exact_periodic_scalar_diffusion(lambda x: np.sin(2 * np.pi * x[:, 0]))


def test_l2_error_examples():
    one = lambda x: np.ones(len(x))
    assert l2_error(one, one) == 0.0
    assert l2_error(one, zero) == pytest.approx(1.0, abs=1e-14)
    s = lambda x: np.sin(2 * np.pi * x[:, 0])
    assert l2_error(s, zero) == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    assert l2_error(s, zero, dim=3) == pytest.approx(1 / math.sqrt(2), abs=1e-10)


# -- Miranda-Talenti --------------------------------------------------------


def test_mt_periodic_ratio():
    v = lambda x: np.sin(2 * np.pi * x[:, 0]) * np.cos(4 * np.pi * x[:, 1]) + 0.3 * np.cos(2 * np.pi * (x[:, 0] + x[:, 1]))
    hess, lap = miranda_talenti_check(v, "periodic", N_fd=64)
    assert hess / lap == pytest.approx(1.0, abs=1e-6)


def test_mt_periodic_3d():
    v = lambda x: np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1]) * np.cos(2 * np.pi * x[:, 2])
    hess, lap = miranda_talenti_check(v, "periodic", N_fd=24, dim=3)
    assert hess / lap == pytest.approx(1.0, abs=1e-6)


def test_mt_periodic_continuum_value():
    # for sin(2 pi x) on the torus ||D^2 v|| = ||Delta v|| = 4 pi^2 / sqrt 2
    hess, lap = miranda_talenti_check(lambda x: np.sin(2 * np.pi * x[:, 0]))
    assert lap == pytest.approx(4 * math.pi**2 / math.sqrt(2), rel=1e-3)
    assert hess == pytest.approx(lap, rel=1e-12)


@pytest.mark.parametrize("dim", [2, 3])
def test_mt_dirichlet_bump(dim):
    v = lambda x: np.prod(x * (1 - x), axis=1) * (1 + x[:, 0])
    hess, lap = miranda_talenti_check(v, "dirichlet", N_fd=64 if dim == 2 else 24, dim=dim)
    assert hess <= lap + 1e-8


def test_mt_unknown_kind():
    with pytest.raises(ValueError):
        miranda_talenti_check(zero, "neumann")


# -- weak residual audit ----------------------------------------------------


def test_batteries_have_ten_distinct_members():
    for dim in (2, 3):
        for battery in (periodic_battery(dim), dirichlet_battery(dim)):
            assert len(battery) == 10
            assert len({phi.label for phi in battery}) == 10


def test_dirichlet_battery_vanishes_on_boundary():
    t = np.linspace(0, 1, 7)
    edge = np.stack([t, np.zeros_like(t)], axis=1)
    for phi in dirichlet_battery(2):
        np.testing.assert_allclose(phi.value(edge), 0, atol=1e-14)
        np.testing.assert_allclose(phi.value(edge[:, ::-1] + [1, 0]), 0, atol=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_battery_derivatives_by_finite_differences(dim):
    x = np.random.default_rng(1).random((4, dim))
    eps = 1e-5
    for phi in periodic_battery(dim) + dirichlet_battery(dim):
        for d in range(dim):
            e = np.eye(dim)[d] * eps
            fd = (phi.value(x + e) - phi.value(x - e)) / (2 * eps)
            np.testing.assert_allclose(phi.grad(x)[:, d], fd, rtol=1e-6, atol=1e-6)
            fd2 = (phi.grad(x + e) - phi.grad(x - e)) / (2 * eps)
            np.testing.assert_allclose(phi.hess(x)[:, :, d], fd2, rtol=1e-5, atol=1e-4)


PERIODIC_FIELDS = [
    cf.constant_identity(2),
    cf.trig_drift(0.15),
    cf.checkerboard((1.0, 2.0)),
    cf.checkerboard((1.0, 3.0), split_axis=1),
    cf.layered([1.0, 2.0, 4.0, 2.0]),
]


@pytest.mark.parametrize("field", PERIODIC_FIELDS, ids=lambda c: c.family_tag)
def test_periodic_oracles_pass_weak_audit(field):
    u = periodic_oracle(field)
    cells = 8 if field.alignment is None else math.lcm(8, field.alignment)
    for phi in periodic_battery(2):
        assert abs(weak_residual(u, field, phi, cells=cells)) <= 1e-8


def test_wrong_density_fails_weak_audit():
    field = cf.trig_drift(0.15)
    res = [abs(weak_residual(lambda x: np.ones(len(x)), field, phi)) for phi in periodic_battery(2)]
    assert max(res) > 1e-3


@pytest.mark.parametrize("source", ["F", "f"])
def test_dirichlet_oracle_passes_weak_audit(source):
    field = cf.manufactured_dirichlet([[1.0, 0.1], [0.1, 1.0]], [0.2, 0.0], source=source)
    u = exact_dirichlet(cf.sine_product(2)[0])
    for phi in dirichlet_battery(2):
        assert abs(weak_residual(u, field, phi, "dirichlet")) <= 1e-8


def test_weak_residual_stable_in_quadrature_order():
    field = cf.trig_drift(0.15)
    u = periodic_oracle(field)
    for phi in periodic_battery(2)[:3]:
        assert abs(weak_residual(u, field, phi, order=8) - weak_residual(u, field, phi, order=10)) <= 1e-10
