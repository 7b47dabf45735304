import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma

from scalarcurv.blowup import GAMMA_SCALE
from scalarcurv.bubble_space import Bubble, GalerkinSpace, SpectralMode, mode_eval, tangent_frame
from scalarcurv.curvature_model import CurvatureChart, ExampleFamily
from scalarcurv.errors import DomainError
from scalarcurv.quadrature import AngularRule, RadialRule
from scalarcurv.reduction import (
    ReductionConfig,
    alpha_expansion,
    alpha_terms,
    gradient_coeffs,
    kazdan_warner_residual,
    solve_reduction,
    space_for,
    w2_projection_coeffs,
    w2_series_check,
    w2_series_coeffs,
)

ORIGIN = np.zeros(3)
FAMILY = ExampleFamily(2.6, 1.0).chart()
CONSTANT = CurvatureChart({(0, 0, 0, 0): 0.7})
# adds grad(Laplacian) != 0 at the origin while keeping it critical
ODD = FAMILY + CurvatureChart({(3, 0, 0, 2): 0.5, (1, 2, 0, 2): 0.5, (1, 0, 2, 2): 0.5})


def sphere_mean(e):
    # mean of x^e over the unit sphere, from the Gamma-function formula
    if any(v % 2 for v in e):
        return 0.0
    return 2 * np.prod([gamma((v + 1) / 2) for v in e]) / gamma((sum(e) + 3) / 2) / (4 * math.pi)


def quad_inf(f, points=()):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        edges = [0.0, *points, np.inf]
        return sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=400)[0] for a, b in zip(edges[:-1], edges[1:]))


# ------------------------------------------------------------- gradient
def test_gradient_vanishes_at_t_zero():
    g = gradient_coeffs(FAMILY, 0.0, 0.1, ORIGIN)
    assert np.max(np.abs(g)) < 1e-13


def test_gradient_vanishes_for_constant_chart():
    g = gradient_coeffs(CONSTANT, 0.4, 0.1, np.array([0.2, 0.0, -0.1]))
    assert np.max(np.abs(g)) < 1e-13


def test_kernel_coefficient_against_radial_oracle():
    t, mu = 0.1, 0.05
    cfg = ReductionConfig()
    g = gradient_coeffs(FAMILY, t, mu, ORIGIN, config=cfg)
    terms = FAMILY.term_list()
    k0 = FAMILY.value(ORIGIN)

    def mean_k(rho):
        q = 1 + rho * rho
        return sum(c * rho ** sum(e) * q ** -d * sphere_mean(e) for c, e, d in terms)

    # Dirichlet-normalised scale mode: c f(r) with f(r) = (1+r^2)^-1/2 (1 - 2/(1+r^2))
    f = lambda r: (1 + r * r) ** -0.5 * (1 - 2 / (1 + r * r))
    df = lambda r: -r * (1 + r * r) ** -1.5 * (1 - 2 / (1 + r * r)) + (1 + r * r) ** -0.5 * 4 * r / (1 + r * r) ** 2
    c = 1 / math.sqrt(4 * math.pi * quad_inf(lambda r: r * r * df(r) ** 2))
    sign = math.copysign(1.0, mode_eval(SpectralMode(0, 1, 1), Bubble(1.0), ORIGIN) * f(0.0))  # relative sign of the mode
    s = (1 + t * k0) ** -0.25
    z5 = lambda r: 3 ** 1.25 * (1 + r * r) ** -2.5
    integral = 4 * math.pi * quad_inf(lambda r: r * r * (mean_k(mu * r) - k0) * z5(r) * sign * c * f(r), (1 / mu, 10 / mu))
    oracle = -s ** 5 * t * integral
    got = g[_space(cfg, mu).kernel_index[0]]
    assert abs(oracle) > 1e-7  # nonzero, although the second-order term vanishes here
    assert got == pytest.approx(oracle, rel=1e-9)
    # the bubble direction (0,0) is forced too
    assert abs(g[_space(cfg, mu).index(0, 0, 1)]) > 1e-7


def _space(cfg, mu):
    return space_for(cfg, mu)


# -------------------------------------------------------------- solve
def test_solve_at_t_zero_is_trivial():
    res = solve_reduction(FAMILY, 0.0, 0.1, ORIGIN)
    assert res.iterations == 1
    assert np.max(np.abs(res.w_coeffs)) < 1e-13 and np.max(np.abs(res.alpha)) < 1e-13
    assert res.w0_scale == 0.0


def test_solve_constant_chart_absorbed_by_scaling():
    res = solve_reduction(CONSTANT, 0.5, 0.1, ORIGIN)
    assert np.max(np.abs(res.w_coeffs)) < 1e-13 and np.max(np.abs(res.alpha)) < 1e-13
    assert res.w0_scale == pytest.approx((1 + 0.5 * 0.7) ** -0.25 - 1, rel=1e-15)


@pytest.fixture(scope="module")
def family_solution():
    return solve_reduction(FAMILY, 0.2, 0.1, ORIGIN)


def test_kernel_orthogonality(family_solution):
    res = family_solution
    sp = res.space
    assert np.array_equal(res.w_coeffs[sp.kernel_index], np.zeros(4))
    # Dirichlet product with a kernel direction xi equals 5 int z^4 xi w
    pts = sp.r[:, None, None] * sp.angular.nodes[None, :, :]
    frame = tangent_frame(Bubble(1.0), pts)
    wv = sp.synthesize(res.w_coeffs)
    z4 = sp.z_nodes[:, None] ** 4
    for a in range(4):
        assert abs(sp.integrate(5 * z4 * frame[a] * wv)) < 1e-9


def test_stationarity_off_kernel(family_solution):
    res = family_solution
    g = gradient_coeffs(FAMILY, res.t, res.mu, res.y, res.w_coeffs)
    keep = ~res.space.kernel_mask
    assert np.max(np.abs(g[keep])) < 1e-10
    assert np.allclose(g[res.space.kernel_index], res.alpha, rtol=0, atol=1e-15)


def test_uniqueness_from_different_starts(family_solution):
    cfg = ReductionConfig()
    base = family_solution
    for initial in (np.zeros(base.space.size), 1.5 * base.w_coeffs):
        other = solve_reduction(FAMILY, 0.2, 0.1, ORIGIN, cfg, initial=initial)
        gap = np.linalg.norm(other.w_coeffs - base.w_coeffs) + np.linalg.norm(other.alpha - base.alpha)
        assert gap < 10 * cfg.tolerance


def test_domain_guards():
    with pytest.raises(DomainError):
        solve_reduction(FAMILY, 0.2, 1.5, ORIGIN)
    with pytest.raises(DomainError):
        solve_reduction(FAMILY, 2.0, 0.1, ORIGIN)
    with pytest.raises(DomainError):
        ReductionConfig(tolerance=0.0)
    with pytest.raises(DomainError):
        alpha_terms(FAMILY, 0.2, 0.1, ORIGIN, 6)


def test_truncation_stability_fixed_sizes():
    # raising (i_max, j_max) from (4, 12) to (5, 16) should move alpha by < 1e-8 relative
    a = solve_reduction(FAMILY, 0.2, 0.1, ORIGIN, ReductionConfig(i_max=4, j_max=12)).alpha
    b = solve_reduction(FAMILY, 0.2, 0.1, ORIGIN, ReductionConfig(i_max=5, j_max=16)).alpha
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


def test_adaptive_truncation_stability():
    cfg = ReductionConfig()
    a = solve_reduction(FAMILY, 0.2, 0.1, ORIGIN, cfg).alpha
    b = solve_reduction(FAMILY, 0.2, 0.1, ORIGIN, ReductionConfig(i_max=5, modes_per_inverse_mu=16.0)).alpha
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


# -------------------------------------------------------------- expansions
def test_low_orders_vanish_at_family_center():
    terms = alpha_terms(FAMILY, 0.3, 0.05, ORIGIN, 3)
    assert np.array_equal(terms[0], np.zeros(4))
    assert np.array_equal(terms[1], np.zeros(4))
    assert abs(terms[2][0]) < 1e-12  # a0 = 0 on the line through (2.6, 1)


def test_first_order_matches_gradient_formula():
    y = np.array([0.1, -0.2, 0.05])
    t, mu = 0.3, 0.04
    jet = FAMILY.jet_at(y, 2)
    pre = -t * mu * (1 + t * jet.value) ** -1.25 * math.pi / (3 ** 0.25 * math.sqrt(5))
    assert np.allclose(alpha_terms(FAMILY, t, mu, y, 1)[0], pre * np.concatenate([[0.0], jet.gradient()]), rtol=1e-14)


@pytest.mark.parametrize("t", [0.1, 0.5])
def test_order_four_bracket(t):
    # rescaled order-4 scale component equals a1 + t a2 = -56 t when b = 1
    mu = 0.05
    k0 = FAMILY.value(ORIGIN)
    a4 = alpha_terms(FAMILY, t, mu, ORIGIN, 4)[3][0]
    assert GAMMA_SCALE * (1 + t * k0) ** 2.25 / (t * mu ** 4) * a4 == pytest.approx(-56 * t, rel=1e-12)


def test_expansion_sum_is_sum_of_terms():
    terms = alpha_terms(ODD, 0.2, 0.05, ORIGIN, 5)
    assert np.allclose(alpha_expansion(ODD, 0.2, 0.05, ORIGIN, 5), np.sum(terms, axis=0), rtol=0, atol=0)
    assert np.array_equal(terms[4][1:], np.zeros(3))


def test_translation_components_order_four():
    t = 0.2
    mus = [0.1, 0.07, 0.05, 0.035]
    errs = []
    for mu in mus:
        res = solve_reduction(ODD, t, mu, ORIGIN)
        errs.append(np.linalg.norm(res.alpha[1:] - alpha_expansion(ODD, t, mu, ORIGIN, 4)[1:]))
    slope = np.polyfit(np.log(mus), np.log(errs), 1)[0]
    assert slope >= 4.2


# --------------------------------------------------------- second correction
@pytest.fixture(scope="module")
def w2_space():
    return GalerkinSpace(4, 8, RadialRule.tangent(128), AngularRule.product(24, 48))


def test_w2_harmonic_quadratic_has_no_radial_part(w2_space):
    chart = CurvatureChart({(2, 0, 0, 1): 1.0, (0, 2, 0, 1): -1.0})
    coeffs = w2_series_coeffs(chart.jet_at(ORIGIN, 2), w2_space)
    assert np.array_equal(w2_space.block(coeffs, 0), np.zeros_like(w2_space.block(coeffs, 0)))


def test_w2_mixed_quadratic_populates_one_harmonic(w2_space):
    chart = CurvatureChart({(1, 1, 0, 1): 1.0})
    jet = chart.jet_at(ORIGIN, 2)
    series = w2_series_coeffs(jet, w2_space)
    proj = w2_projection_coeffs(jet, w2_space)
    populated = [k for k in range(w2_space.size) if abs(proj[k]) > 1e-12]
    assert populated and all(w2_space.modes[k].i == 2 and w2_space.modes[k].l == (1, 2) for k in populated)
    assert np.max(np.abs(series - proj)) < 1e-10


def test_w2_series_check_example():
    assert w2_series_check(FAMILY, ORIGIN, 8) < 1e-8


# ------------------------------------------------------------ Kazdan-Warner
def test_kazdan_warner_zero_cases():
    res = solve_reduction(FAMILY, 0.0, 0.1, ORIGIN)
    assert np.array_equal(kazdan_warner_residual(FAMILY, res), np.zeros(4))
    res = solve_reduction(CONSTANT, 0.4, 0.1, ORIGIN)
    assert np.array_equal(kazdan_warner_residual(CONSTANT, res), np.zeros(4))
