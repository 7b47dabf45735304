"""Obstruction coefficients a0..a3 at a critical point and the resulting classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature_model import CurvatureChart
from .errors import DomainError
from .quadrature import PvRules, PvSpec, pv_weighted_remainder
from .special_functions import sphere_poly_integral
from .curvature_model import _poly_mul

ORIGIN = np.zeros(3)
GRADIENT_TOL = 1e-10


@dataclass(frozen=True)
class CoefficientSet:
    a0: float
    a1: float
    a2: float
    a3: float | None
    pieces: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CriticalPointReport:
    center: tuple
    gradient: tuple
    laplacian: float
    hessian: tuple
    hessian_invertible: bool
    morse_index: int
    coefficients: CoefficientSet | None
    in_A: bool
    in_M: bool
    in_M_star: bool
    in_M_star_plus: bool
    in_M_star_zero: bool
    predicted_t_star: float | None
    crit_minus: bool
    boundary_case: bool


def _require_critical(jet) -> None:
    g = jet.gradient()
    if np.max(np.abs(g)) > GRADIENT_TOL:
        raise DomainError(f"origin is not a critical point: |grad k(0)| = {np.max(np.abs(g)):.3e}")


def _hessian_solve(jet, rhs):
    h = jet.hessian()
    if abs(np.linalg.det(h)) < 1e-12 * max(1.0, np.max(np.abs(h))) ** 3:
        raise DomainError("Hessian of k at the origin is singular")
    return np.linalg.solve(h, rhs)


def compute_a0(chart: CurvatureChart, split_radius: float = 1.0, rules: PvRules | None = None) -> float:
    """Principal value of (k - T^2) |x|^-6; the odd cubic band is removed inside the ball."""
    jet = chart.jet_at(ORIGIN, 1)
    _require_critical(jet)
    return pv_weighted_remainder(chart, ORIGIN, PvSpec.for_weight(6, 0, split_radius), rules=rules)


def compute_a1(chart: CurvatureChart) -> float:
    jet = chart.jet_at(ORIGIN, 4)
    grad_lap = jet.gradient_laplacian_power(1)
    v = _hessian_solve(jet, grad_lap)
    return jet.laplacian_power(2) + float(grad_lap @ v)


def quartic_form_moment(jet) -> float:
    """Integral over the unit sphere of (D^2k(0)(x)^2)^2."""
    quad = {e: 2.0 * c for e, c in jet.form_poly(2).items()}  # D^2k(x)^2 = 2 * (D^2k x^2 / 2!)
    return sphere_poly_integral(_poly_mul(quad, quad))


def compute_a2(chart: CurvatureChart) -> float:
    jet = chart.jet_at(ORIGIN, 4)
    return jet.value * compute_a1(chart) - 15.0 / (8.0 * math.pi) * quartic_form_moment(jet)


def a3_pieces(chart: CurvatureChart, split_radius: float = 1.0, rules: PvRules | None = None) -> dict:
    jet = chart.jet_at(ORIGIN, 4)
    _require_critical(jet)
    v = _hessian_solve(jet, jet.gradient_laplacian_power(1))
    grad_pv = np.array(
        [
            pv_weighted_remainder(chart.gradient_chart(i), ORIGIN, PvSpec.for_weight(6, 0, split_radius), rules=rules)
            for i in range(3)
        ]
    )
    vec_pv = pv_weighted_remainder(chart, ORIGIN, PvSpec.for_weight(8, 1, split_radius), "x", rules=rules)
    scalar_pv = pv_weighted_remainder(chart, ORIGIN, PvSpec.for_weight(8, 0, split_radius), rules=rules)
    return {"hessian_solve_grad_lap": v, "pv_grad_w6": grad_pv, "pv_x_w8": vec_pv, "pv_w8": scalar_pv}


def compute_a3(chart: CurvatureChart, split_radius: float = 1.0, rules: PvRules | None = None) -> float:
    """Third coefficient; the cubic-remainder integral is the vector with components x_i."""
    if chart.max_jet_order < 6:
        raise DomainError("a3 needs a chart with jets up to order 6")
    p = a3_pieces(chart, split_radius, rules)
    v = p["hessian_solve_grad_lap"]
    return (
        12.0 / math.pi ** 2 * float(v @ p["pv_grad_w6"])
        + 48.0 / math.pi ** 2 * float(v @ p["pv_x_w8"])
        - 120.0 / math.pi ** 2 * p["pv_w8"]
    )


def compute_coefficients(chart: CurvatureChart, with_a3: bool = True, split_radius: float = 1.0,
                         rules: PvRules | None = None) -> CoefficientSet:
    jet = chart.jet_at(ORIGIN, 4)
    _require_critical(jet)
    grad_lap = jet.gradient_laplacian_power(1)
    v = _hessian_solve(jet, grad_lap)
    bilap = jet.laplacian_power(2)
    a1 = bilap + float(grad_lap @ v)
    moment = quartic_form_moment(jet)
    a2 = jet.value * a1 - 15.0 / (8.0 * math.pi) * moment
    a0 = pv_weighted_remainder(chart, ORIGIN, PvSpec.for_weight(6, 0, split_radius), rules=rules)
    pieces = {
        "k0": jet.value,
        "laplacian": jet.laplacian_power(1),
        "bilaplacian": bilap,
        "grad_laplacian": grad_lap.tolist(),
        "hessian_solve_grad_lap": v.tolist(),
        "quartic_form_moment": moment,
        "pv_a0": a0,
    }
    a3 = None
    if with_a3 and chart.max_jet_order >= 6:
        p = a3_pieces(chart, split_radius, rules)
        a3 = (
            12.0 / math.pi ** 2 * float(v @ p["pv_grad_w6"])
            + 48.0 / math.pi ** 2 * float(v @ p["pv_x_w8"])
            - 120.0 / math.pi ** 2 * p["pv_w8"]
        )
        pieces.update(
            pv_grad_w6=p["pv_grad_w6"].tolist(), pv_x_w8=p["pv_x_w8"].tolist(), pv_w8=p["pv_w8"]
        )
    return CoefficientSet(a0, a1, a2, a3, pieces)


def _sign(x: float, tol: float) -> int:
    if abs(x) <= tol:
        return 0
    return 1 if x > 0 else -1


def classify(chart: CurvatureChart, tol: float = 1e-6, split_radius: float = 1.0) -> CriticalPointReport:
    """Memberships of the origin of ``chart`` in the blow-up candidate sets.

    A coefficient counts as zero when its modulus is below tol * (1 + |jet|).
    """
    jet = chart.jet_at(ORIGIN, 4)
    grad = jet.gradient()
    hess = jet.hessian()
    lap = jet.laplacian_power(1)
    eig = np.linalg.eigvalsh(hess)
    scale = 1.0 + max(abs(v) for v in jet.partials.values())
    zero_tol = tol * scale
    invertible = bool(np.min(np.abs(eig)) > 1e-10 * max(1.0, np.max(np.abs(eig))))
    morse = int(np.sum(eig < 0))
    critical = bool(np.max(np.abs(grad)) <= GRADIENT_TOL)
    coeffs = None
    in_A = in_M = star = star_plus = star_zero = boundary = False
    t_star = None
    crit_minus = False
    if critical and invertible:
        coeffs = compute_coefficients(chart, with_a3=chart.max_jet_order >= 6, split_radius=split_radius)
        in_A = abs(lap) <= zero_tol
        a0_zero = abs(coeffs.a0) <= zero_tol
        a2_zero = abs(coeffs.a2) <= zero_tol
        in_M = in_A and a0_zero and not a2_zero
        if in_M:
            a1_zero = abs(coeffs.a1) <= zero_tol
            ratio = 0.0 if a1_zero else -coeffs.a1 / coeffs.a2
            star = 0.0 <= ratio <= 1.0
            star_plus = 0.0 < ratio <= 1.0 and not a1_zero
            boundary = star and not star_plus
            if star_plus:
                t_star = ratio
            if a1_zero and coeffs.a3 is not None:
                star_zero = abs(coeffs.a3) > zero_tol
        first = next(
            (s for s in (_sign(lap, zero_tol), _sign(coeffs.a0, zero_tol), _sign(coeffs.a1, zero_tol)) if s != 0),
            0,
        )
        crit_minus = first == -1
    return CriticalPointReport(
        center=(0.0, 0.0, 0.0),
        gradient=tuple(grad.tolist()),
        laplacian=lap,
        hessian=tuple(tuple(r) for r in hess.tolist()),
        hessian_invertible=invertible,
        morse_index=morse,
        coefficients=coeffs,
        in_A=in_A,
        in_M=in_M,
        in_M_star=star,
        in_M_star_plus=star_plus,
        in_M_star_zero=star_zero,
        predicted_t_star=t_star,
        crit_minus=crit_minus,
        boundary_case=boundary,
    )


def compute_degree(reports) -> int:
    """d = -(1 + sum over points with negative Laplacian of (-1)^index).

    ``reports`` holds (morse_index, laplacian_sign) pairs; only negative signs count.
    """
    total = 1
    for index, lap_sign in reports:
        if lap_sign < 0:
            total += (-1) ** int(index)
    return -total
