import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from gaussmax import LaplaceIntegrand, ManifoldChart, QuadratureError, laplace_cube, laplace_manifold, laplace_truncated
from gaussmax.laplace import cubature, gamma1

CUBE1 = ([-1.0], [1.0])
H2 = 1 / math.sqrt(math.pi)


def generic(fn, lo=CUBE1[0], hi=CUBE1[1]):
    """Integrand without the power-sum marker, forcing adaptive cubature."""
    return LaplaceIntegrand(fn, lo, hi)


def test_constant_zero_gives_volume():
    for d in (1, 2, 3):
        assert laplace_cube(LaplaceIntegrand.constant(0.0, [-1] * d, [1] * d), 5.0) == pytest.approx(2.0**d, rel=1e-12)


@pytest.mark.parametrize("fast", [True, False])
def test_one_d_closed_forms(fast):
    sq = LaplaceIntegrand.power_sum([(0, 0.5, 2.0)], *CUBE1) if fast else generic(lambda x: 0.5 * x[:, 0] ** 2)
    ab = LaplaceIntegrand.power_sum([(0, 1.0, 1.0)], *CUBE1) if fast else generic(lambda x: np.abs(x[:, 0]))
    want_sq = math.sqrt(math.pi / 50) * math.erf(math.sqrt(50))
    assert laplace_cube(sq, 100.0) == pytest.approx(want_sq, rel=1e-6)
    assert want_sq == pytest.approx(0.250663, abs=1e-6)
    assert laplace_cube(ab, 10.0) == pytest.approx(2 * (1 - math.exp(-10)) / 10, rel=1e-6)


def test_against_scipy_quad():
    fn = lambda t: 0.5 * (t**4 + 0.3 * abs(t) ** 1.5)
    want = integrate.quad(lambda t: math.exp(-9 * fn(t)), -1, 1, points=[0], epsabs=0, epsrel=1e-13)[0]
    got = laplace_cube(generic(lambda x: fn(x[:, 0])), 9.0)
    assert got == pytest.approx(want, rel=1e-8)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 2.0, 4.0])
@pytest.mark.parametrize("fast", [True, False])
def test_scaling_law(beta, fast):
    c = 0.7
    ig = LaplaceIntegrand.power_sum([(0, c, beta)], *CUBE1) if fast else generic(lambda x: c * np.abs(x[:, 0]) ** beta)
    target = 2 * math.gamma(1 + 1 / beta)
    lams = (1e2, 1e4, 1e6) if beta >= 1 else (1e4, 1e6)  # small beta leaks past the cube at 1e2
    for lam in lams:
        assert laplace_cube(ig, lam) * (lam * c) ** (1 / beta) == pytest.approx(target, rel=1e-4)


def test_separable_product():
    f1 = lambda t: 0.5 * t**4
    f2 = lambda t: 0.3 * np.abs(t) ** 1.2
    ig = generic(lambda x: f1(x[:, 0]) + f2(x[:, 1]), [-1, -1], [1, 1])
    one = laplace_cube(generic(lambda x: f1(x[:, 0])), 50.0) * laplace_cube(generic(lambda x: f2(x[:, 0])), 50.0)
    assert laplace_cube(ig, 50.0) == pytest.approx(one, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(1.0, 1e4), st.floats(1.01, 10.0))
def test_monotone_in_lambda(beta, lam, factor):
    ig = LaplaceIntegrand.power_sum([(0, 0.5, beta)], *CUBE1)
    assert laplace_cube(ig, lam) > laplace_cube(ig, lam * factor)


def test_truncated_example():
    ig = LaplaceIntegrand.power_sum([(0, 0.5, 4.0)], *CUBE1)
    r = laplace_truncated(ig, 10.0)
    assert r.threshold == pytest.approx(2 * gamma1(10.0) / 10)
    assert r.deviation <= 1e-4
    assert r.value <= r.full


def test_truncated_ratio_tends_to_one():
    ig = LaplaceIntegrand.power_sum([(0, 0.5, 4.0)], *CUBE1)
    ratios = [laplace_truncated(ig, u).value / laplace_truncated(ig, u).full for u in (3.0, 5.0, 10.0, 20.0, 40.0)]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(1.0, abs=1e-12)


def test_truncated_empty_region():
    r = laplace_truncated(LaplaceIntegrand.constant(0.4, *CUBE1), 50.0)
    assert r.value == 0.0


def test_truncated_bounded_by_full_2d():
    ig = generic(lambda x: 0.5 * (x[:, 0] ** 2 + np.abs(x[:, 1]) ** 3), [-1, -1], [1, 1])
    r = laplace_truncated(ig, 6.0)
    assert r.value <= r.full and r.deviation < 0.05


def test_manifold_segment():
    u = 7.0
    chart = ManifoldChart.affine((0.0, 0.0), [[1.0, 0.0]], (-1.0,), (1.0,), "K0", "seg")
    f = lambda X: 0.5 * X[:, 0] ** 4
    got = laplace_manifold(chart, f, u, H2, [1 / u])
    want = H2 * u * laplace_cube(LaplaceIntegrand.power_sum([(0, 0.5, 4.0)], *CUBE1), u * u)
    assert got == pytest.approx(want, rel=1e-8)


def test_manifold_circle():
    u, rho = 5.0, 0.4
    chart = ManifoldChart.circle((0.0, 0.0), rho, "K0")
    f = lambda X: np.full(X.shape[0], 0.01)
    got = laplace_manifold(chart, f, u, H2, [1 / u])
    assert got == pytest.approx(2 * math.pi * rho * H2 * u * math.exp(-u * u * 0.01), rel=1e-8)


def test_manifold_callable_factors_match_hoisted():
    u = 4.0
    chart = ManifoldChart.affine((0.0, 0.3), [[1.0, 0.0]], (-1.0,), (1.0,), "K0", "off")
    f = lambda X: 0.5 * (X[:, 0] ** 2 + X[:, 1] ** 2)
    a = laplace_manifold(chart, f, u, H2, [1 / u])
    b = laplace_manifold(chart, f, u, lambda x: H2, lambda uu, x: [1 / uu])
    assert a == pytest.approx(b, rel=1e-10)


def test_manifold_degenerate_is_zero():
    chart = ManifoldChart.affine((0.0, 0.0), [[1.0, 0.0]], (0.5,), (0.5,), "K0", "pt")
    assert laplace_manifold(chart, lambda X: X[:, 0] ** 2, 5.0, 1.0, [0.2]) == 0.0


def test_manifold_singular_chart_raises():
    chart = ManifoldChart(lambda p: np.stack([p[..., 0] ** 3, 0 * p[..., 0]], axis=-1), (-1.0,), (1.0,), "K0",
                          name="cusp")
    with pytest.raises(QuadratureError):
        laplace_manifold(chart, lambda X: X[:, 0] ** 2, 3.0, 1.0, [0.3])


def test_cubature_nonconvergence_reports():
    with pytest.raises(QuadratureError) as info:
        cubature(lambda x: 1 / np.sqrt(np.abs(x[:, 0] - 0.123456)), [0.0], [1.0], rtol=1e-14, max_level=3)
    assert info.value.estimate is not None
