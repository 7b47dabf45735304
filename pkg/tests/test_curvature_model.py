import json
import math
from functools import lru_cache

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from scalarcurv.curvature_model import (
    CurvatureChart,
    ExampleFamily,
    chart_from_json_dict,
    load_chart,
    multi_indices,
)
from scalarcurv.errors import DomainError, SpecError

X1, X2, X3 = sp.symbols("x1 x2 x3")


def sympy_expr(chart: CurvatureChart):
    q = 1 + X1 ** 2 + X2 ** 2 + X3 ** 2
    return sum(c * X1 ** e[0] * X2 ** e[1] * X3 ** e[2] * q ** (-d) for c, e, d in chart.term_list())


@lru_cache(maxsize=None)
def _example_expr(a, b):
    return sympy_expr(ExampleFamily(a, b).chart())


def sympy_partial(expr, alpha, point):
    d = expr
    for sym, n in zip((X1, X2, X3), alpha):
        if n:
            d = sp.diff(d, sym, n)
    return float(d.subs({X1: point[0], X2: point[1], X3: point[2]}))


term = st.tuples(
    st.floats(-2, 2, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
    st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)),
    st.integers(0, 3),
).filter(lambda t: sum(t[1]) <= 2 * t[2])
charts = st.lists(term, min_size=1, max_size=4).map(CurvatureChart)
points = st.tuples(*[st.floats(-1.5, 1.5, allow_nan=False)] * 3).map(np.array)


# ---------------------------------------------------------------- values
@settings(max_examples=30, deadline=None)
@given(charts, points)
def test_evaluation_matches_sympy(chart, y):
    expr = sympy_expr(chart)
    expected = float(expr.subs({X1: y[0], X2: y[1], X3: y[2]}))
    assert chart.value(y) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_unbounded_terms_rejected():
    with pytest.raises(DomainError):
        CurvatureChart({(2, 1, 0, 1): 1.0})
    with pytest.raises(DomainError):
        CurvatureChart({(0, 0, 0, 0): float("nan")})


def test_example_family_domain():
    with pytest.raises(DomainError):
        ExampleFamily(3.5, 1.0)
    with pytest.raises(DomainError):
        ExampleFamily(1.0, -0.1)


@pytest.mark.parametrize("ab", [(2.984, 1.04), (0.0, 0.0), (3.0, 5.0), (-7.0, 0.0)])
def test_example_family_positive_for_t_in_unit_interval(ab):
    chart = ExampleFamily(*ab).chart()
    g = np.linspace(-6, 6, 25)
    pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    vals = chart(pts)
    # 1 + t k is affine in t, so checking t = 1 covers [0, 1]
    assert np.min(1.0 + vals) > 0


def test_example_family_matches_its_formula():
    chart = ExampleFamily(2.6, 1.0).chart()
    rng = np.random.default_rng(3)
    for x in rng.normal(size=(20, 3)):
        q = 1 + x @ x
        n2 = x @ x
        formula = 1 + (3 * x[0] ** 2 - 2 * x[1] ** 2 - x[2] ** 2) / q ** 2 + n2 ** 2 / q ** 3 * (1.0 - 2.6 / q - (1 - 2.6) / q ** 2)
        assert chart.value(x) == pytest.approx(formula, rel=1e-13)


# ------------------------------------------------------------------ jets
def test_example_family_jet_at_origin():
    jet = ExampleFamily(2.6, 1.0).chart().jet_at(np.zeros(3), 2)
    assert np.array_equal(jet.gradient(), np.zeros(3))
    assert np.allclose(jet.hessian(), np.diag([6.0, -4.0, -2.0]), atol=1e-14)
    assert jet.laplacian_power(1) == pytest.approx(0.0, abs=1e-14)


def test_constant_chart_jet():
    jet = CurvatureChart({(0, 0, 0, 0): 1.0}).jet_at(np.array([0.3, -1.0, 2.0]), 6)
    for order in range(1, 7):
        for alpha in multi_indices(order):
            assert jet.partial(alpha) == 0.0


def test_jet_order_limit():
    chart = CurvatureChart({(0, 0, 0, 0): 1.0}, max_jet_order=5)
    with pytest.raises(DomainError):
        chart.jet_at(np.zeros(3), 6)


@settings(max_examples=12, deadline=None)
@given(charts, points)
def test_jets_match_sympy_up_to_order_six(chart, y):
    expr = sympy_expr(chart)
    jet = chart.jet_at(y, 6)
    for order in (1, 3, 6):
        for alpha in multi_indices(order)[:4]:
            expected = sympy_partial(expr, alpha, y)
            assert jet.partial(alpha) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def _richardson_fd(f, y, alpha, h):
    """Central differences for first and second partials, Richardson-extrapolated in h."""

    def cd(step):
        e = np.eye(3)
        axes = [i for i, n in enumerate(alpha) for _ in range(n)]
        if len(axes) == 1:
            a = axes[0]
            return (f(y + step * e[a]) - f(y - step * e[a])) / (2 * step)
        a, b = axes
        return (
            f(y + step * (e[a] + e[b])) - f(y + step * (e[a] - e[b])) - f(y - step * (e[a] - e[b])) + f(y - step * (e[a] + e[b]))
        ) / (4 * step * step)

    return (4 * cd(h / 2) - cd(h)) / 3


@settings(max_examples=20, deadline=None)
@given(charts, points)
def test_jets_match_finite_differences(chart, y):
    jet = chart.jet_at(y, 2)
    for alpha in multi_indices(1) + multi_indices(2):
        fd = _richardson_fd(chart.value, y, alpha, 1e-3)
        scale = max(1.0, abs(jet.partial(alpha)))
        assert abs(fd - jet.partial(alpha)) <= 1e-6 * scale


@settings(max_examples=15, deadline=None)
@given(charts, points)
def test_mixed_partials_symmetric(chart, y):
    jet = chart.jet_at(y, 3)
    t = jet.tensor(3)
    for perm in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
        assert np.array_equal(t, np.transpose(t, perm))


# ------------------------------------------------------------- remainders
def test_remainder_zero_cases():
    chart = ExampleFamily(1.0, 0.5).chart()
    y = np.array([0.2, -0.1, 0.4])
    assert chart.taylor_remainder(chart.jet_at(y, 0), y) == 0.0
    const = CurvatureChart({(0, 0, 0, 0): 3.0})
    assert const.taylor_remainder(const.jet_at(np.zeros(3), 2), np.array([0.5, 1.0, -2.0])) == 0.0


def test_order_three_remainder_against_sympy_series():
    chart = ExampleFamily(2.6, 1.0).chart()
    expr = _example_expr(2.6, 1.0)
    s = sp.Symbol("s")
    # Taylor polynomial along the ray x = s (1, 0, 0) up to s^3, at s = 1
    series = sp.series(expr.subs({X1: s, X2: 0, X3: 0}), s, 0, 4).removeO()
    t3 = float(series.subs(s, 1))
    x = np.array([1.0, 0.0, 0.0])
    got = chart.taylor_remainder(chart.jet_at(np.zeros(3), 3), x)
    assert got == pytest.approx(chart.value(x) - t3, rel=1e-12)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_remainder_order(order):
    chart = ExampleFamily(1.0, 0.5).chart() + CurvatureChart({(1, 0, 0, 1): 0.3, (1, 1, 1, 3): 0.2})
    y = np.array([0.1, 0.2, -0.3])
    jet = chart.jet_at(y, order)
    direction = np.array([0.6, -0.48, 0.64])
    ratios = []
    for h in (1e-1, 1e-2):
        ratios.append(abs(chart.taylor_remainder(jet, y + h * direction)) / h ** (order + 1))
    assert ratios[1] < 2 * ratios[0] + 1e-6


# ------------------------------------------------------------ ray series
def test_ray_series_sums_to_values():
    chart = ExampleFamily(2.984, 1.04).chart() + CurvatureChart({(1, 2, 0, 2): 0.5})
    y = np.array([0.3, -0.2, 0.1])
    dirs = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [-0.48, 0.6, 0.64]])
    series = chart.ray_series(y, dirs, 60)
    r = 0.4
    summed = np.sum(series * r ** np.arange(60)[:, None], axis=0)
    assert np.allclose(summed, chart(y + r * dirs), rtol=1e-13, atol=1e-14)


# ---------------------------------------------------------------- rotation
def test_rotation_covariance_of_jets():
    rng = np.random.default_rng(7)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    chart = ExampleFamily(2.6, 1.0).chart() + CurvatureChart({(1, 1, 1, 3): 0.4, (2, 1, 0, 2): -0.3})
    rot = chart.rotated(q)
    y = np.array([0.2, -0.4, 0.3])
    # rotated chart is x -> k(Q^T x); its jet at Q y is the rotated tensor
    j0, j1 = chart.jet_at(y, 3), rot.jet_at(q @ y, 3)
    assert j1.value == pytest.approx(j0.value, rel=1e-12)
    assert np.allclose(j1.gradient(), q @ j0.gradient(), atol=1e-12)
    assert np.allclose(j1.hessian(), q @ j0.hessian() @ q.T, atol=1e-12)
    t3 = np.einsum("ia,jb,kc,abc->ijk", q, q, q, j0.tensor(3))
    assert np.allclose(j1.tensor(3), t3, atol=1e-12)


# --------------------------------------------------------------------- JSON
@settings(max_examples=30, deadline=None)
@given(charts)
def test_json_round_trip(chart):
    text = json.dumps(chart.to_json_dict())
    assert load_chart(text) == chart


def test_family_shorthand():
    assert chart_from_json_dict({"family": "example", "a": 2.6, "b": 1.0}) == ExampleFamily(2.6, 1.0).chart()


def test_load_chart_from_file(tmp_path):
    path = tmp_path / "chart.json"
    path.write_text(json.dumps({"terms": [{"coeff": 1.0, "exponents": [2, 0, 0], "denom_power": 2}]}))
    assert load_chart(str(path)) == CurvatureChart({(2, 0, 0, 2): 1.0})


@pytest.mark.parametrize(
    "payload,field",
    [
        ({"terms": [{"coeff": 1.0, "exponents": [2, 0], "denom_power": 2}]}, "chart.terms[0].exponents"),
        ({"terms": [{"coeff": "x", "exponents": [2, 0, 0], "denom_power": 2}]}, "chart.terms[0].coeff"),
        ({"terms": [{"coeff": 1.0, "exponents": [3, 0, 0], "denom_power": 1}]}, "chart.terms[0]"),
        ({"terms": [{"exponents": [0, 0, 0], "denom_power": 0}]}, "chart.terms[0].coeff"),
        ({"family": "example", "a": 2.6}, "chart.b"),
        ({"family": "other", "a": 1, "b": 1}, "chart.family"),
        ({}, "chart.terms"),
    ],
)
def test_malformed_charts_name_the_field(payload, field):
    with pytest.raises(SpecError, match=field.replace("[", r"\[").replace("]", r"\]")):
        chart_from_json_dict(payload)


def test_load_chart_rejects_missing_file_and_bad_json():
    with pytest.raises(SpecError):
        load_chart("/nonexistent/chart.json")
    with pytest.raises(SpecError, match="invalid JSON"):
        load_chart("{not json")
