"""Radial, angular and full-space quadrature plus principal-value remainders.

Radial integrals over (0, inf) use xi = 1 - 2/(1+r^2) written as xi = -cos(2 psi),
i.e. r = tan(psi), with Gauss-Legendre nodes in psi.  Every integrand of the form
r^a (1+r^2)^(-b) with integer a and half-integer 2b becomes sin^a cos^c in psi,
which Gauss-Legendre integrates spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

_LEGGAUSS_CACHE: dict = {}


def leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _LEGGAUSS_CACHE[n]


def compensated_sum(values: Sequence[float]) -> float:
    return math.fsum(float(v) for v in np.ravel(values))


@dataclass(frozen=True)
class RadialRule:
    """Nodes and weights for integrals of f(r) dr over (0, inf)."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def tangent(cls, n: int = 128, breakpoints: Sequence[float] = ()) -> "RadialRule":
        """Gauss-Legendre in psi = arctan(r), optionally split into panels at ``breakpoints``."""
        if n < 2:
            raise DomainError("radial rule needs at least 2 nodes per panel")
        cuts = [0.0] + sorted(math.atan(float(b)) for b in breakpoints if b > 0) + [0.5 * math.pi]
        t, w = leggauss(n)
        nodes, weights = [], []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (hi - lo)
            psi = lo + half * (t + 1.0)
            c = np.cos(psi)
            nodes.append(np.tan(psi))
            weights.append(half * w / (c * c))
        return cls(np.concatenate(nodes), np.concatenate(weights))

    @classmethod
    def graded(cls, n_total: int, breakpoints: Sequence[float] = (), min_per_panel: int = 24) -> "RadialRule":
        """Tangent rule whose panels get nodes in proportion to their length in psi.

        Degree-j modes oscillate uniformly in psi, so ``n_total`` spread evenly
        resolves them while every panel keeps at least ``min_per_panel`` nodes.
        """
        if n_total < 2 or min_per_panel < 2:
            raise DomainError("radial rule needs at least 2 nodes per panel")
        cuts = [0.0] + sorted(math.atan(float(b)) for b in set(breakpoints) if b > 0) + [0.5 * math.pi]
        nodes, weights = [], []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            n = max(min_per_panel, math.ceil(n_total * (hi - lo) / (0.5 * math.pi)))
            t, w = leggauss(n)
            half = 0.5 * (hi - lo)
            psi = lo + half * (t + 1.0)
            c = np.cos(psi)
            nodes.append(np.tan(psi))
            weights.append(half * w / (c * c))
        return cls(np.concatenate(nodes), np.concatenate(weights))

    @classmethod
    def xi_legendre(cls, n: int = 128) -> "RadialRule":
        """Gauss-Legendre directly in xi; kept for comparison, converges only algebraically."""
        x, w = leggauss(n)
        r = np.sqrt((1.0 + x) / (1.0 - x))
        return cls(r, w / (r * (1.0 - x) ** 2))

    @property
    def xi(self) -> np.ndarray:
        return 1.0 - 2.0 / (1.0 + self.nodes ** 2)

    def integrate(self, values) -> float:
        return compensated_sum(np.asarray(values) * self.weights)


@dataclass(frozen=True)
class AngularRule:
    """Antipodally closed product rule on the unit sphere.

    The first half of the nodes lies in the upper hemisphere (cos theta > 0) and
    the second half is its exact negation, with equal weights.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def product(cls, n_theta: int = 32, n_phi: int = 64) -> "AngularRule":
        if n_theta % 2 or n_phi % 2 or n_theta < 2 or n_phi < 2:
            raise DomainError("angular rule needs even, positive node counts")
        t, w = leggauss(n_theta)
        upper = t > 0
        t, w = t[upper], w[upper]
        phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
        st = np.sqrt(1.0 - t * t)
        tt, pp = np.meshgrid(t, phi, indexing="ij")
        ss = np.meshgrid(st, phi, indexing="ij")[0]
        half = np.stack([ss * np.cos(pp), ss * np.sin(pp), tt], axis=-1).reshape(-1, 3)
        hw = np.repeat(w * (2.0 * math.pi / n_phi), n_phi)
        return cls(np.concatenate([half, -half]), np.concatenate([hw, hw]))

    @property
    def half(self) -> int:
        return self.nodes.shape[0] // 2

    def integrate(self, values) -> np.ndarray:
        """Sum over the last axis of ``values``; antipodal pairs are added first,
        so odd integrands give exactly zero."""
        v = np.asarray(values, dtype=float)
        h = self.half
        paired = v[..., :h] + v[..., h:]
        return paired @ self.weights[:h]


def integrate_r3(f: Callable[[np.ndarray], np.ndarray], radial: RadialRule, angular: AngularRule) -> float:
    """Integral of f over R^3 by the product of a radial and an angular rule."""
    pts = radial.nodes[:, None, None] * angular.nodes[None, :, :]
    vals = np.asarray(f(pts), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        q, s = np.argwhere(bad)[0]
        raise FloatingPointError(f"non-finite integrand at x={pts[q, s].tolist()}")
    shells = angular.integrate(vals)
    return compensated_sum(shells * radial.weights * radial.nodes ** 2)


@dataclass(frozen=True)
class PvSpec:
    """Taylor-subtraction recipe for a principal value against |x|^-p (times a monomial)."""

    weight_power: int
    inner_taylor_order: int
    outer_taylor_order: int
    split_radius: float = 1.0

    def __post_init__(self):
        if self.split_radius <= 0:
            raise DomainError("split_radius must be positive")
        if self.outer_taylor_order > self.inner_taylor_order:
            raise DomainError("outer Taylor order may not exceed the inner order")

    @classmethod
    def for_weight(cls, weight_power: int, factor_degree: int = 0, split_radius: float = 1.0) -> "PvSpec":
        """Orders that make both pieces absolutely integrable.

        Inside B_s the remainder must vanish to order p - deg - 3; outside, the
        subtracted polynomial must have degree at most p - deg - 4.
        """
        outer = weight_power - factor_degree - 4
        return cls(weight_power, outer + 1, outer, split_radius)


@dataclass(frozen=True)
class PvRules:
    """Quadrature resolution used by :func:`pv_weighted_remainder`."""

    n_inner: int = 48
    n_outer: int = 48
    angular: AngularRule | None = None
    series_terms: int = 64
    series_radius: float = 0.25


_DEFAULT_PV_RULES = PvRules()


def pv_weighted_remainder(chart, center, spec: PvSpec, extra_factor=None, rules: PvRules | None = None):
    """Principal value of (k(center + x) - T(x)) |x|^-p * factor(x) over R^3.

    Inside B_s the Taylor polynomial of order ``inner_taylor_order`` is removed,
    outside that of order ``outer_taylor_order``; the difference is a band of
    odd homogeneous terms whose angular integral the antipodal rule makes zero.

    ``extra_factor`` is None, a monomial exponent triple, or the string "x" for
    the vector factor (x1, x2, x3); the latter returns a 3-vector.
    """
    rules = rules or _DEFAULT_PV_RULES
    angular = rules.angular or _default_angular()
    center = np.asarray(center, dtype=float)
    if extra_factor is None:
        factors = [(0, 0, 0)]
    elif isinstance(extra_factor, str) and extra_factor == "x":
        factors = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    else:
        factors = [tuple(int(v) for v in extra_factor)]
    deg = sum(factors[0])
    p = spec.weight_power
    n_in, n_out = spec.inner_taylor_order, spec.outer_taylor_order
    # inside: |x|^(n_in+1+deg-p) r^2 must be integrable, or be the odd leading term
    # (even p) that the antipodal rule cancels shell by shell
    inner_ok = n_in + 3 - p + deg >= 0 or (n_in + 4 - p + deg == 0 and p % 2 == 0)
    if not inner_ok or n_out - p + deg + 3 >= 0:
        raise DomainError(
            f"Taylor orders ({n_in}, {n_out}) do not make |x|^-{p} * x^{deg} integrable"
        )
    if n_in >= rules.series_terms:
        raise DomainError("not enough series terms for the requested Taylor order")
    s = spec.split_radius
    w = angular.nodes
    m_terms = max(rules.series_terms, n_in + 2)
    series = chart.ray_series(center, w, m_terms)  # (m_terms, n_dirs)
    # the ray series converges for r < sqrt(1 + |center|^2) (nearest pole of 1/(1+|x|^2))
    r_switch = rules.series_radius * min(1.0, math.sqrt(1.0 + float(center @ center)))

    def taylor(order, r):
        powers = r[:, None] ** np.arange(order + 1)[None, :]  # (nr, order+1)
        return powers @ series[: order + 1]

    def k_on(r):
        pts = center + r[:, None, None] * w[None, :, :]
        return chart(pts)

    # inner ball, Gauss-Legendre in r on [0, s]
    t, wt = leggauss(rules.n_inner)
    r_in = 0.5 * s * (t + 1.0)
    w_in = 0.5 * s * wt
    small = r_in < r_switch
    rem_in = np.empty((r_in.size, w.shape[0]))
    if np.any(small):
        rs = r_in[small]
        powers = rs[:, None] ** np.arange(n_in + 1, m_terms)[None, :]
        rem_in[small] = powers @ series[n_in + 1 : m_terms]
    if np.any(~small):
        rl = r_in[~small]
        rem_in[~small] = k_on(rl) - taylor(n_in, rl)
    # outer region, r = s / tau with tau in (0, 1]
    t, wt = leggauss(rules.n_outer)
    tau = 0.5 * (t + 1.0)
    r_out = s / tau
    w_out = 0.5 * wt * s / (tau * tau)
    rem_out = k_on(r_out) - taylor(n_out, r_out)

    results = []
    for e in factors:
        ang = w[:, 0] ** e[0] * w[:, 1] ** e[1] * w[:, 2] ** e[2]
        radial_pow = 2.0 + deg - p
        inner = angular.integrate(rem_in * ang[None, :]) * r_in ** radial_pow * w_in
        outer = angular.integrate(rem_out * ang[None, :]) * r_out ** radial_pow * w_out
        results.append(compensated_sum(np.concatenate([inner, outer])))
    if len(results) == 1 and not (isinstance(extra_factor, str)):
        return results[0]
    return np.array(results)


_ANGULAR_CACHE: dict = {}


def _default_angular() -> AngularRule:
    key = (32, 64)
    if key not in _ANGULAR_CACHE:
        _ANGULAR_CACHE[key] = AngularRule.product(*key)
    return _ANGULAR_CACHE[key]


def default_angular_rule() -> AngularRule:
    return _default_angular()
