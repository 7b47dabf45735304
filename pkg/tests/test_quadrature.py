import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from scalarcurv.curvature_model import CurvatureChart, ExampleFamily
from scalarcurv.errors import DomainError
from scalarcurv.quadrature import (
    AngularRule,
    PvSpec,
    RadialRule,
    compensated_sum,
    default_angular_rule,
    integrate_r3,
    pv_weighted_remainder,
)
from scalarcurv.special_functions import sphere_monomial_integral

QUARTIC = {(4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0, (2, 2, 0): 2.0, (2, 0, 2): 2.0, (0, 2, 2): 2.0}


def radial_quad(f):
    a, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=200)
    b, _ = integrate.quad(f, 1, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return a + b


# ------------------------------------------------------------ radial rules
@pytest.mark.parametrize("a", range(0, 11))
def test_radial_rule_exact_on_rational_weights(a):
    rule = RadialRule.tangent(64)
    assert np.all(np.diff(rule.nodes) > 0) and np.all(np.isfinite(rule.weights))
    for gap in (3, 4, 5, 8):
        b = 0.5 * (a + gap)
        got = rule.integrate(rule.nodes ** a * (1 + rule.nodes ** 2) ** -b)
        assert got == pytest.approx(radial_quad(lambda r: r ** a * (1 + r * r) ** -b), rel=1e-12)


def test_graded_rule_matches_plain_rule():
    plain = RadialRule.tangent(128)
    graded = RadialRule.graded(200, breakpoints=(1.0, 10.0, 40.0))
    f = lambda r: r ** 2 * (1 + r * r) ** -3
    assert graded.integrate(f(graded.nodes)) == pytest.approx(plain.integrate(f(plain.nodes)), rel=1e-13)
    assert np.all(np.diff(graded.nodes) > 0)


def test_radial_rule_rejects_tiny_rules():
    with pytest.raises(DomainError):
        RadialRule.tangent(1)
    with pytest.raises(DomainError):
        RadialRule.graded(1)


# ----------------------------------------------------------- angular rules
def test_angular_rule_antipodal_and_total_area():
    rule = AngularRule.product(32, 64)
    h = rule.half
    assert np.array_equal(rule.nodes[h:], -rule.nodes[:h])
    assert np.array_equal(rule.weights[h:], rule.weights[:h])
    assert np.all(rule.weights > 0)
    assert compensated_sum(rule.weights) == pytest.approx(4 * math.pi, rel=1e-14)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1.0, atol=1e-15)


def test_angular_rule_monomials_up_to_degree_12():
    rule = default_angular_rule()
    x = rule.nodes
    for e1 in range(13):
        for e2 in range(13 - e1):
            for e3 in range(13 - e1 - e2):
                vals = x[:, 0] ** e1 * x[:, 1] ** e2 * x[:, 2] ** e3
                assert float(rule.integrate(vals)) == pytest.approx(sphere_monomial_integral((e1, e2, e3)), abs=1e-12)


@given(st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(0, 7)).filter(lambda e: sum(e) % 2 == 1))
def test_odd_monomials_vanish_bitwise(e):
    rule = AngularRule.product(16, 32)
    x = rule.nodes
    # repeated products keep v(-x) = -v(x) bitwise (vectorised pow need not)
    vals = np.ones(x.shape[0])
    for axis, n in enumerate(e):
        for _ in range(n):
            vals = vals * x[:, axis]
    assert float(rule.integrate(vals)) == 0.0


def test_angular_rule_rejects_odd_counts():
    with pytest.raises(DomainError):
        AngularRule.product(15, 32)


# ----------------------------------------------------------- R^3 integrals
def test_integrate_r3_examples():
    radial, angular = RadialRule.tangent(128), AngularRule.product(32, 64)
    z6 = integrate_r3(lambda x: (3 ** 0.25 / np.sqrt(1 + np.sum(x * x, -1))) ** 6, radial, angular)
    assert z6 == pytest.approx(3 * math.sqrt(3) * math.pi ** 2 / 4, rel=1e-13)
    # 4 pi * int r^2 (1+r^2)^-3 dr, evaluated by scipy
    oracle = 4 * math.pi * radial_quad(lambda r: r * r * (1 + r * r) ** -3)
    val = integrate_r3(lambda x: (1 + np.sum(x * x, -1)) ** -3.0, radial, angular)
    assert val == pytest.approx(oracle, rel=1e-13)
    assert val == pytest.approx(math.pi ** 2 / 4, rel=1e-13)
    odd = integrate_r3(lambda x: x[..., 0] * (1 + np.sum(x * x, -1)) ** -4.0, radial, angular)
    assert odd == 0.0


def test_integrate_r3_converged_in_radial_nodes():
    angular = AngularRule.product(8, 16)
    f = lambda x: 3 ** 1.5 * (1 + np.sum(x * x, -1)) ** -3.0
    a = integrate_r3(f, RadialRule.tangent(128), angular)
    b = integrate_r3(f, RadialRule.tangent(256), angular)
    assert abs(a - b) < 1e-12


def test_integrate_r3_reports_non_finite_values():
    with pytest.raises(FloatingPointError, match="non-finite"), np.errstate(divide="ignore", invalid="ignore"):
        integrate_r3(lambda x: 1.0 / (x[..., 0] - x[..., 0]), RadialRule.tangent(8), AngularRule.product(4, 8))


# -------------------------------------------------------- principal values
def test_pv_of_pure_quartic_tail():
    chart = CurvatureChart({(e[0], e[1], e[2], 3): c for e, c in QUARTIC.items()})  # |x|^4/(1+|x|^2)^3
    val = pv_weighted_remainder(chart, np.zeros(3), PvSpec(6, 3, 2))
    assert val == pytest.approx(3 * math.pi ** 2 / 4, rel=1e-10)


def test_pv_vanishes_for_quadratic_polynomial_part():
    # bounded charts that are polynomials of degree <= 2 are constants
    chart = CurvatureChart({(0, 0, 0, 0): 2.0})
    assert pv_weighted_remainder(chart, np.zeros(3), PvSpec(6, 2, 2)) == 0.0


def test_pv_order_two_inner_matches_order_three():
    # the cubic Taylor term is odd, so subtracting it or not gives the same value
    chart = ExampleFamily(1.0, 0.5).chart() + CurvatureChart({(3, 0, 0, 2): 0.4, (1, 1, 1, 3): -0.3})
    a = pv_weighted_remainder(chart, np.zeros(3), PvSpec(6, 2, 2))
    b = pv_weighted_remainder(chart, np.zeros(3), PvSpec(6, 3, 2))
    assert a == pytest.approx(b, rel=1e-8)


def test_pv_example_family_a0_line():
    val = pv_weighted_remainder(ExampleFamily(0.0, 0.0).chart(), np.zeros(3), PvSpec.for_weight(6))
    assert val == pytest.approx(-35 * math.pi ** 2 / 64, rel=1e-10)


@pytest.mark.parametrize("ab", [(0.0, 0.0), (2.6, 1.0), (1.0, 3.0)])
def test_pv_split_radius_independence(ab):
    chart = ExampleFamily(*ab).chart()
    for p, deg, factor in [(6, 0, None), (8, 0, None), (8, 1, "x")]:
        a = pv_weighted_remainder(chart, np.zeros(3), PvSpec.for_weight(p, deg, 1.0), factor)
        b = pv_weighted_remainder(chart, np.zeros(3), PvSpec.for_weight(p, deg, 2.0), factor)
        scale = max(np.max(np.abs(a)), 1e-300)
        assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= 1e-8 * max(scale, 1.0)


def test_pv_against_scipy_off_axis_chart():
    # axisymmetric chart: k = 1 + x3^2/(1+|x|^2)^3; the angular integral is done in closed form
    chart = CurvatureChart({(0, 0, 0, 0): 1.0, (0, 0, 2, 3): 1.0})
    val = pv_weighted_remainder(chart, np.zeros(3), PvSpec.for_weight(6))
    # remainder x3^2 ((1+r^2)^-3 - 1) against r^-6 r^2 dr; the sphere integral of x3^2 is r^2 * 4pi/3
    oracle = 4 * math.pi / 3 * radial_quad(lambda r: ((1 + r * r) ** -3 - 1) / (r * r))
    assert val == pytest.approx(oracle, rel=1e-10)


def test_pv_rejects_non_integrable_orders():
    chart = ExampleFamily(0.0, 0.0).chart()
    with pytest.raises(DomainError):
        pv_weighted_remainder(chart, np.zeros(3), PvSpec(6, 1, 1))
    with pytest.raises(DomainError):
        pv_weighted_remainder(chart, np.zeros(3), PvSpec(6, 3, 3))
    with pytest.raises(DomainError):
        PvSpec(6, 2, 3)
    with pytest.raises(DomainError):
        PvSpec(6, 3, 2, split_radius=0.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=50))
def test_compensated_sum_matches_fsum(values):
    assert compensated_sum(values) == math.fsum(values)
