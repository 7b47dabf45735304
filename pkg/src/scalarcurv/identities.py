"""Self-test battery for the closed-form integral identities, checked against
adaptive quadrature (scipy) and Gauss-Jacobi rules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .quadrature import AngularRule
from .special_functions import (
    JacobiParams,
    beta_moment,
    jacobi_eval,
    jacobi_orthogonality_norm,
    jacobi_table,
    lemma_a3_integral,
    lemma_a4_series,
    jacobi_series_weight,
    sphere_monomial_moment,
)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_error < self.tolerance)


def _quad(f, a, b) -> float:
    # split at r = 1 so both halves are smooth under QUADPACK's transformation
    if a == 0 and math.isinf(b):
        return _quad(f, 0.0, 1.0) + _quad(f, 1.0, b)
    with warnings.catch_warnings():
        # epsrel=1e-13 sits at the roundoff floor; QUADPACK warns but the value is converged
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def check_radial_jacobi_moment(j_max: int = 10) -> IdentityCheck:
    errs = []
    for j in range(j_max + 1):
        p = JacobiParams(j, 2.5)

        def f(r):
            xi = 1.0 - 2.0 / (1.0 + r * r)
            return r ** 6 * (1.0 + r * r) ** -5 * xi * float(jacobi_eval(p, xi))

        errs.append(_rel(lemma_a3_integral(j), _quad(f, 0.0, math.inf)))
    return IdentityCheck("radial Jacobi moment (r^6 weight), j=0..%d" % j_max, max(errs), 1e-10)


def check_telescoped_series(j_max: int = 20000) -> IdentityCheck:
    return IdentityCheck("telescoped series -> 1/288", abs(lemma_a4_series(j_max) - 1.0 / 288.0), 1e-8)


def squared_jacobi_double_sum(n_terms: int = 400) -> float:
    """2^-7 sum_{j,k < n} beta_j beta_k int (1-xi^2)^{5/2} xi P_j P_k, by Gauss-Jacobi quadrature."""
    nodes, weights = special.roots_jacobi(n_terms + 2, 2.5, 2.5)
    table = jacobi_table(n_terms - 1, 2.5, nodes)
    beta = np.array([jacobi_series_weight(j) for j in range(n_terms)])
    series = beta @ table
    return 2.0 ** -7 * math.fsum(weights * nodes * series * series)


def check_squared_jacobi_double_sum(n_terms: int = 400) -> IdentityCheck:
    return IdentityCheck("squared Jacobi series quadrature -> 1/288", abs(squared_jacobi_double_sum(n_terms) - 1.0 / 288.0), 1e-8)


def check_beta_moments() -> IdentityCheck:
    errs = []
    for a in range(0, 9):
        for gap in range(1, 7):
            b = 0.5 * (a + 1 + gap)
            errs.append(_rel(beta_moment(a, b), _quad(lambda r: r ** a * (1.0 + r * r) ** -b, 0.0, math.inf)))
    return IdentityCheck("radial beta moments, a=0..8", max(errs), 1e-10)


def check_jacobi_norms(j_max: int = 8) -> IdentityCheck:
    errs = []
    for sigma in (0.5, 1.5, 2.5, 3.5):
        for i in range(j_max + 1):
            for j in range(i, j_max + 1):
                pi, pj = JacobiParams(i, sigma), JacobiParams(j, sigma)
                val = _quad(lambda x: (1.0 - x * x) ** sigma * float(jacobi_eval(pi, x)) * float(jacobi_eval(pj, x)), -1.0, 1.0)
                if i == j:
                    errs.append(_rel(val, jacobi_orthogonality_norm(pi)))
                else:
                    errs.append(abs(val))
    return IdentityCheck("Jacobi orthogonality and norms, j<=%d" % j_max, max(errs), 1e-10)


def check_sphere_moments(max_total: int = 4) -> IdentityCheck:
    rule = AngularRule.product(40, 80)
    x = rule.nodes
    errs = []
    for b1 in range(max_total + 1):
        for b2 in range(max_total + 1 - b1):
            for b3 in range(max_total + 1 - b1 - b2):
                vals = x[:, 0] ** (2 * b1) * x[:, 1] ** (2 * b2) * x[:, 2] ** (2 * b3)
                errs.append(_rel(sphere_monomial_moment((b1, b2, b3)), float(rule.integrate(vals))))
    return IdentityCheck("sphere monomial moments, total degree <= %d" % (2 * max_total), max(errs), 1e-10)


def run_battery() -> list[IdentityCheck]:
    return [
        check_radial_jacobi_moment(),
        check_telescoped_series(),
        check_squared_jacobi_double_sum(),
        check_beta_moments(),
        check_jacobi_norms(),
        check_sphere_moments(),
    ]
