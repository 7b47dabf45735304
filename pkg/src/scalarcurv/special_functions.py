"""Symmetric Jacobi polynomials, gamma-ratio helpers and closed-form integral identities.

Everything here is specialised to three space dimensions.  Jacobi polynomials
with equal parameters are evaluated by the three-term recurrence; the
Rodrigues formula is only used by the test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import DomainError

SPHERE_AREA = 4.0 * math.pi


@dataclass(frozen=True)
class JacobiParams:
    """Degree ``j`` and common parameter ``sigma`` of P_j^{(sigma, sigma)}."""

    j: int
    sigma: float

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 0:
            raise DomainError(f"jacobi degree must be a nonnegative integer, got {self.j!r}")
        if self.sigma < 0.5 or abs(2.0 * self.sigma - round(2.0 * self.sigma)) > 1e-12:
            raise DomainError(f"sigma must be a half-integer >= 1/2, got {self.sigma!r}")


def log_gamma_ratio(num: float, den: float) -> float:
    """log(Gamma(num) / Gamma(den)) without overflow."""
    return math.lgamma(num) - math.lgamma(den)


def gamma_ratio(num: float, den: float) -> float:
    return math.exp(log_gamma_ratio(num, den))


def jacobi_table(j_max: int, sigma: float, x) -> np.ndarray:
    """Rows P_0 .. P_{j_max} of P^{(sigma,sigma)} at the points ``x``.

    Uses xi P_j = A_j P_{j+1} + C_j P_{j-1} with
    A_j = (j+1)(j+2s+1)/((2j+2s+1)(j+s+1)) and C_j = (j+s)/(2j+2s+1).
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise DomainError("jacobi argument outside [-1, 1]")
    s = float(sigma)
    out = np.empty((j_max + 1,) + x.shape)
    out[0] = 1.0
    if j_max >= 1:
        out[1] = (s + 1.0) * x
    for j in range(1, j_max):
        a = (j + 1.0) * (j + 2.0 * s + 1.0) / ((2.0 * j + 2.0 * s + 1.0) * (j + s + 1.0))
        c = (j + s) / (2.0 * j + 2.0 * s + 1.0)
        out[j + 1] = (x * out[j] - c * out[j - 1]) / a
    return out


def jacobi_eval(params: JacobiParams, x):
    """P_j^{(sigma,sigma)}(x) for |x| <= 1, scalar or array."""
    vals = jacobi_table(params.j, params.sigma, x)[params.j]
    return float(vals) if np.ndim(vals) == 0 else vals


def jacobi_derivative_table(j_max: int, sigma: float, x) -> np.ndarray:
    """d/dx of the rows of :func:`jacobi_table`.

    d/dx P_j^{(s,s)} = (j + 2s + 1)/2 * P_{j-1}^{(s+1,s+1)}.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((j_max + 1,) + x.shape)
    if j_max >= 1:
        shifted = jacobi_table(j_max - 1, sigma + 1.0, x)
        for j in range(1, j_max + 1):
            out[j] = 0.5 * (j + 2.0 * sigma + 1.0) * shifted[j - 1]
    return out


def jacobi_orthogonality_norm(params: JacobiParams) -> float:
    """Integral over [-1,1] of (1 - x^2)^sigma P_j(x)^2."""
    j, s = params.j, params.sigma
    log_val = (
        (2.0 * s + 1.0) * math.log(2.0)
        + 2.0 * math.lgamma(j + s + 1.0)
        - math.log(2.0 * j + 2.0 * s + 1.0)
        - math.lgamma(j + 1.0)
        - math.lgamma(j + 2.0 * s + 1.0)
    )
    return math.exp(log_val)


def jacobi_endpoint_value(params: JacobiParams) -> float:
    """P_j(1) = Gamma(j+s+1)/(Gamma(s+1) j!)."""
    j, s = params.j, params.sigma
    return math.exp(math.lgamma(j + s + 1.0) - math.lgamma(s + 1.0) - math.lgamma(j + 1.0))


def beta_moment(a: float, b: float) -> float:
    """Integral over (0, inf) of r^a (1 + r^2)^(-b)."""
    if not (a > -1.0 and 2.0 * b - a > 1.0):
        raise DomainError(f"beta_moment diverges for a={a}, b={b}: need a > -1 and 2b - a > 1")
    return 0.5 * math.exp(
        math.lgamma(0.5 * (a + 1.0)) + math.lgamma(b - 0.5 * (a + 1.0)) - math.lgamma(b)
    )


def interval_beta_moment(a: float, b: float) -> float:
    """Integral over [-1,1] of (1+x)^a (1-x)^b."""
    if a <= -1.0 or b <= -1.0:
        raise DomainError(f"interval_beta_moment diverges for a={a}, b={b}")
    return math.exp(
        (a + b + 1.0) * math.log(2.0)
        + math.lgamma(a + 1.0)
        + math.lgamma(b + 1.0)
        - math.lgamma(a + b + 2.0)
    )


def sphere_monomial_moment(beta) -> float:
    """Integral over the unit sphere of x1^(2b1) x2^(2b2) x3^(2b3)."""
    b = [int(v) for v in beta]
    if any(v < 0 for v in b):
        raise DomainError(f"sphere moment exponents must be nonnegative, got {beta!r}")
    log_val = math.log(2.0) + sum(math.lgamma(v + 0.5) for v in b) - math.lgamma(1.5 + sum(b))
    return math.exp(log_val)


def sphere_monomial_integral(exponents) -> float:
    """Integral over the unit sphere of x^e; zero as soon as one exponent is odd."""
    e = [int(v) for v in exponents]
    if any(v % 2 for v in e):
        return 0.0
    return sphere_monomial_moment([v // 2 for v in e])


# Polynomials are {(e1, e2, e3): coeff} dictionaries.
Poly = Mapping[tuple, float]


def poly_laplacian(poly: Poly) -> dict:
    out: dict = {}
    for e, c in poly.items():
        for axis in range(3):
            n = e[axis]
            if n >= 2:
                ne = list(e)
                ne[axis] -= 2
                key = tuple(ne)
                out[key] = out.get(key, 0.0) + c * n * (n - 1)
    return {k: v for k, v in out.items() if v != 0.0}


def poly_degree(poly: Poly) -> int:
    return max((sum(e) for e in poly), default=0)


def sphere_poly_integral(poly: Poly) -> float:
    """Integral of a polynomial over the unit sphere from monomial moments."""
    return math.fsum(c * sphere_monomial_integral(e) for e, c in poly.items())


def sphere_homogeneous_integral_by_laplacian(poly: Poly, degree: int) -> float:
    """Integral of a homogeneous polynomial of the given degree, via repeated Laplacians.

    Uses int P_m = int (Laplacian P_m) / (6 + (3+m)(m-2)), ending at degree 0.
    """
    if degree % 2:
        return 0.0
    if degree == 0:
        return SPHERE_AREA * sum(poly.values())
    lap = poly_laplacian(poly)
    return sphere_homogeneous_integral_by_laplacian(lap, degree - 2) / (6.0 + (3.0 + degree) * (degree - 2.0))


def sphere_homogeneous_linear_moment_by_laplacian(poly: Poly, degree: int, axis: int) -> float:
    """Integral of P_m(x) x_axis over the unit sphere, via repeated Laplacians.

    Uses int P_m x_i = int (Laplacian P_m) x_i / (10 + (4+m)(m-3)), ending at degree 1.
    """
    if degree % 2 == 0:
        return 0.0
    if degree == 1:
        e = [0, 0, 0]
        e[axis] = 1
        return poly.get(tuple(e), 0.0) * SPHERE_AREA / 3.0
    lap = poly_laplacian(poly)
    return sphere_homogeneous_linear_moment_by_laplacian(lap, degree - 2, axis) / (
        10.0 + (4.0 + degree) * (degree - 3.0)
    )


def _laplacian_power_product(ell: int) -> float:
    return math.prod(2.0 * m * (1.0 + 2.0 * m) for m in range(1, ell + 1))


def _odd_laplacian_power_product(ell: int) -> float:
    return math.prod(2.0 * m * (3.0 + 2.0 * m) for m in range(1, ell + 1))


def laplace_moment_even(jet, ell: int) -> float:
    """Sphere integral of D^{2l}k(y)(x)^{2l} / (2l)! from the jet's iterated Laplacian."""
    if ell < 0 or 2 * ell > jet.order:
        raise DomainError(f"jet order {jet.order} too small for even moment of order {2 * ell}")
    lap = jet.laplacian_power(ell)
    return 2.0 * math.pi ** 1.5 * lap / (math.gamma(1.5) * _laplacian_power_product(ell))


def laplace_moment_odd(jet, ell: int) -> np.ndarray:
    """Sphere integral of D^{2l+1}k(y)(x)^{2l+1} x_i / (2l+1)! for i = 1..3."""
    if ell < 0 or 2 * ell + 1 > jet.order:
        raise DomainError(f"jet order {jet.order} too small for odd moment of order {2 * ell + 1}")
    grad = jet.gradient_laplacian_power(ell)
    return 2.0 * math.pi ** 1.5 * grad / (3.0 * math.gamma(1.5) * _odd_laplacian_power_product(ell))


def lemma_a3_integral(j: int) -> float:
    """Closed form of the integral over (0, inf) of
    r^6 (1+r^2)^-5 xi P_j^{(5/2,5/2)}(xi) with xi = 1 - 2/(1+r^2)."""
    if j < 0:
        raise DomainError("degree must be nonnegative")
    return (
        math.gamma(1.5)
        * (j * j + 6.0 * j + 2.0)
        * 0.5
        * math.exp(math.lgamma(3.5 + j) - math.lgamma(6.0 + j))
    )


def jacobi_series_weight(j: int) -> float:
    """(3 + j) j! / Gamma(j + 7/2)."""
    return (3.0 + j) * math.exp(math.lgamma(j + 1.0) - math.lgamma(j + 3.5))


def lemma_a4_series(j_max: int) -> float:
    """Partial sum (1/4) sum_{l <= j_max} (l+1)!/(l+5)!, whose limit is 1/288.

    Summed exactly in rationals, then converted.
    """
    if j_max < 0:
        raise DomainError("j_max must be nonnegative")
    total = Fraction(0)
    for l in range(j_max + 1):
        total += Fraction(1, (l + 2) * (l + 3) * (l + 4) * (l + 5))
    return float(total / 4)


def eigenvalue_fraction(i: int, j: int) -> Fraction:
    n = 4 + 2 * (i + j - 1)
    return 1 - Fraction(15, n * n - 1)


def eigenvalue(i: int, j: int) -> float:
    """Eigenvalue of the bubble Hessian relative to the Dirichlet form, for mode (i, j)."""
    if i < 0 or j < 0:
        raise DomainError("mode indices must be nonnegative")
    return float(eigenvalue_fraction(i, j))


def harmonic_multiplicity(i: int) -> int:
    return 2 * i + 1


def mode_norm_const(i: int, j: int) -> float:
    """Normalisation a_{i,j} making the (i, j) modes Dirichlet-orthonormal."""
    n = i + j
    log_sq = (
        math.log(2.0 * (2.0 + 2.0 * n))
        + math.lgamma(j + 1.0)
        + math.lgamma(2.0 + 2.0 * i + j)
        - math.log((1.0 + 2.0 * n) * (3.0 + 2.0 * n))
        - 2.0 * math.lgamma(1.5 + n)
    )
    return math.exp(0.5 * log_sq)
