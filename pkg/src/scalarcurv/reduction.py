"""Finite-dimensional reduction around a bubble: solve for the correction w and the kernel vector alpha.

Everything runs in the coordinates of the bubble z_{mu,y}, where the curvature
factor becomes K(xi) = 1 + t k(y + mu xi) and the basis is fixed.  With
s = (1 + t k(y))^(-1/4) and u = s z + w, the gradient coefficient on mode m is

    g_m = lambda_m w_m - int [N(w) + t (k(y + mu xi) - k(y)) u^5] Phi_m,

where N(w) = K(y) (|u|^4 u - (s z)^5) - 5 z^4 w collects the terms of order two
and higher in w.  The two identities used (z solves the unperturbed equation
and the basis diagonalises the Hessian) hold exactly in the retained span.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .bubble_space import BUBBLE_CONST, GalerkinSpace, TAU0_SQ, TAU1_SQ
from .curvature_model import CurvatureChart
from .errors import ConvergenceError, DomainError
from .quadrature import AngularRule, PvSpec, RadialRule, pv_weighted_remainder
from .special_functions import mode_norm_const
from .coefficients import quartic_form_moment

SQRT5 = math.sqrt(5.0)
SERIES_TERMS = 48
SERIES_RADIUS = 0.25


@dataclass(frozen=True)
class ReductionConfig:
    """Numerical settings for :func:`solve_reduction`.

    ``far_breakpoints`` are multiples of 1/mu at which the radial rule is split,
    so the scale on which k varies is resolved in bubble coordinates.

    With ``j_max=None`` the radial truncation grows like ``modes_per_inverse_mu / mu``:
    a Jacobi basis in xi needs O(1/mu) modes to resolve structure at |xi| ~ 1/mu,
    where k(y + mu xi) stops being quadratic.  ``radial_nodes`` is the total node
    budget over (0, inf), spread over the panels by length; None picks
    ceil(1.25 j_max) + 64.
    """

    t_range: tuple = (-0.5, 1.0)
    tolerance: float = 1e-11
    max_iterations: int = 200
    i_max: int = 4
    j_max: int | None = None
    radial_nodes: int | None = None
    modes_per_inverse_mu: float = 12.0
    min_j_max: int = 12
    far_breakpoints: tuple = (0.25, 1.0, 4.0)
    n_theta: int = 24
    n_phi: int = 48

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")
        if not self.t_range[0] <= self.t_range[1]:
            raise DomainError("t_range must be ordered")
        if self.i_max < 1 or (self.j_max is not None and self.j_max < 1):
            raise DomainError("truncation must retain the kernel modes (i_max, j_max >= 1)")

    def truncation(self, mu: float) -> tuple[int, int, int]:
        """(i_max, j_max, radial nodes per panel) used at scale mu."""
        j = self.j_max
        if j is None:
            j = max(self.min_j_max, math.ceil(self.modes_per_inverse_mu / mu - 1e-9))
        n = self.radial_nodes if self.radial_nodes is not None else math.ceil(1.25 * j) + 64
        return self.i_max, j, n


_SPACE_CACHE: dict = {}
_SPACE_LOCK = threading.Lock()


def space_for(config: ReductionConfig, mu: float) -> GalerkinSpace:
    """Galerkin space whose radial rule is split at the configured multiples of 1/mu."""
    bps = tuple(round(b / mu, 12) for b in config.far_breakpoints) + (1.0,)
    i_max, j_max, n_radial = config.truncation(mu)
    key = (i_max, j_max, n_radial, bps, config.n_theta, config.n_phi)
    with _SPACE_LOCK:  # shared by the CLI's worker threads
        space = _SPACE_CACHE.get(key)
        if space is None:
            if len(_SPACE_CACHE) > 16:
                _SPACE_CACHE.clear()
            space = GalerkinSpace(
                i_max,
                j_max,
                radial=RadialRule.graded(n_radial, breakpoints=bps),
                angular=_angular(config.n_theta, config.n_phi),
            )
            _SPACE_CACHE[key] = space
    return space


_ANG: dict = {}


def _angular(nt: int, nphi: int) -> AngularRule:
    if (nt, nphi) not in _ANG:
        _ANG[(nt, nphi)] = AngularRule.product(nt, nphi)
    return _ANG[(nt, nphi)]


@dataclass
class ReductionResult:
    w_coeffs: np.ndarray
    alpha: np.ndarray
    residual: float
    iterations: int
    w0_scale: float
    t: float
    mu: float
    y: np.ndarray
    space: GalerkinSpace = field(repr=False)

    def solution_values(self) -> np.ndarray:
        """u = z + w0 + w on the node grid, in bubble coordinates (multiply by mu^-1/2 for x-space)."""
        s = 1.0 + self.w0_scale
        return s * self.space.z_nodes[:, None] + self.space.synthesize(self.w_coeffs)


class _Problem:
    """Node-level data of one (chart, t, mu, y) reduction."""

    def __init__(self, chart: CurvatureChart, t: float, mu: float, y, config: ReductionConfig):
        if not 0 < mu <= 1.0:
            raise DomainError(f"mu must lie in (0, 1], got {mu}")
        lo, hi = config.t_range
        if not lo <= t <= hi:
            raise DomainError(f"t={t} outside the configured range [{lo}, {hi}]")
        self.space = space_for(config, mu)
        sp = self.space
        self.y = np.asarray(y, dtype=float)
        self.t = float(t)
        self.mu = float(mu)
        ky = chart.value(self.y)
        self.K0 = 1.0 + t * ky
        if self.K0 <= 0:
            raise DomainError("1 + t k(y) must be positive")
        self.s = self.K0 ** -0.25
        pts = self.y + mu * sp.r[:, None, None] * sp.angular.nodes[None, :, :]
        kv = chart(pts)
        if np.min(1.0 + t * kv) <= 0:
            raise DomainError("1 + t k must stay positive on the quadrature nodes")
        diff = kv - ky
        # near the centre k - k(y) cancels; sum its ray series instead (radius of convergence >= 1)
        rho = mu * sp.r
        near = rho < SERIES_RADIUS
        if np.any(near):
            series = chart.ray_series(self.y, sp.angular.nodes, SERIES_TERMS)
            rn = rho[near]
            acc = np.zeros((rn.size, series.shape[1]))
            for coeff in series[:0:-1]:
                acc = (acc + coeff[None, :]) * rn[:, None]
            diff[near] = acc
        self.dk = t * diff
        self.z = sp.z_nodes[:, None]
        self.a = self.s * self.z

    def gradient(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        sp = self.space
        wv = sp.synthesize(w)
        u = self.a + wv
        a = self.a
        # K0 (u^5 - a^5) - 5 z^4 wv, factored so that no O(1) terms cancel
        # u^5 - a^5 - 5 a^4 (u - a) = (u - a)^2 (u^3 + 2u^2 a + 3u a^2 + 4a^3)
        q = ((u + 2.0 * a) * u + 3.0 * a * a) * u + 4.0 * a ** 3
        nonlin = self.K0 * wv * wv * q
        u5 = u * u * u * u * u
        forcing = nonlin + self.dk * u5
        g = sp.eigenvalues * w - sp.project(forcing)
        return g, u


def _guess(chart: CurvatureChart, t: float, mu: float, y, space: GalerkinSpace) -> np.ndarray:
    """Leading-order corrections w1 + w2 in bubble coordinates."""
    jet = chart.jet_at(y, 2)
    K0 = 1.0 + t * jet.value
    pts = space.r[:, None, None] * space.angular.nodes[None, :, :]
    z5 = space.z_nodes[:, None] ** 5
    lin = pts @ jet.gradient()
    quad = 0.5 * np.einsum("...i,ij,...j->...", pts, jet.hessian(), pts)
    forcing = (t * K0 ** -1.25) * (mu * lin + mu * mu * quad) * z5
    return space.f0_inverse(space.project(forcing))


def solve_reduction(chart: CurvatureChart, t: float, mu: float, y, config: ReductionConfig | None = None,
                    initial: np.ndarray | None = None) -> ReductionResult:
    """Fixed point of w -> w - F0^{-1} g(w); alpha collects the kernel components of g."""
    config = config or ReductionConfig()
    prob = _Problem(chart, t, mu, y, config)
    sp = prob.space
    if initial is not None and initial.shape == (sp.size,):
        w = np.where(sp.kernel_mask, 0.0, initial)
    else:
        w = _guess(chart, t, mu, prob.y, sp)
    keep = ~sp.kernel_mask
    for it in range(1, config.max_iterations + 1):
        g, _ = prob.gradient(w)
        step = np.zeros_like(w)
        step[keep] = g[keep] / sp.eigenvalues[keep]
        w = w - step
        if np.linalg.norm(step) < config.tolerance:
            break
    else:
        raise ConvergenceError(
            f"reduction did not converge in {config.max_iterations} iterations", last=float(np.linalg.norm(step))
        )
    g, _ = prob.gradient(w)
    return ReductionResult(
        w_coeffs=w,
        alpha=sp.kernel_part(g).copy(),
        residual=float(np.linalg.norm(g[keep])),
        iterations=it,
        w0_scale=prob.s - 1.0,
        t=float(t),
        mu=float(mu),
        y=prob.y.copy(),
        space=sp,
    )


def gradient_coeffs(chart: CurvatureChart, t: float, mu: float, y, w_coeffs=None,
                    config: ReductionConfig | None = None) -> np.ndarray:
    """Coefficients of f_t'(z + w0 + w) on every retained mode."""
    config = config or ReductionConfig()
    prob = _Problem(chart, t, mu, y, config)
    w = prob.space.zeros() if w_coeffs is None else np.asarray(w_coeffs, dtype=float)
    return prob.gradient(w)[0]


# ----------------------------------------------------------------- expansions
def alpha_terms(chart: CurvatureChart, t: float, mu: float, y, order: int = 5,
                split_radius: float = 1.0) -> list[np.ndarray]:
    """The individual expansion terms alpha_1 .. alpha_order (component 0 first).

    Components 1..3 stop at order 4; order 5 contributes to component 0 only.
    """
    if not 1 <= order <= 5:
        raise DomainError("expansion order must be between 1 and 5")
    if order == 5 and chart.max_jet_order < 6:
        raise DomainError("order-5 expansion needs jets up to order 6")
    y = np.asarray(y, dtype=float)
    jet = chart.jet_at(y, min(4, chart.max_jet_order))
    k_y = jet.value
    K = 1.0 + t * k_y
    pre = -t * K ** -1.25
    terms = []
    c12 = math.pi / (3.0 ** 0.25 * SQRT5)
    terms.append(pre * min(1.0, mu) * c12 * np.concatenate([[0.0], jet.gradient()]))
    if order >= 2:
        terms.append(pre * min(1.0, mu ** 2) * c12 * np.array([jet.laplacian_power(1), 0.0, 0.0, 0.0]))
    if order >= 3:
        pv6 = pv_weighted_remainder(chart, y, PvSpec.for_weight(6, 0, split_radius))
        a3 = np.empty(4)
        a3[0] = pre * mu ** 3 * 3.0 ** 0.75 * 4.0 / (math.pi * SQRT5) * pv6
        a3[1:] = pre * mu ** 3 * 3.0 ** 0.25 * math.pi / (2.0 * math.sqrt(15.0)) * jet.gradient_laplacian_power(1)
        terms.append(a3)
    if order >= 4:
        pv8x = pv_weighted_remainder(chart, y, PvSpec.for_weight(8, 1, split_radius), "x")
        a4 = np.empty(4)
        a4[1:] = pre * mu ** 4 * 3.0 ** 0.75 * 8.0 / (math.pi * SQRT5) * pv8x
        a4[0] = (
            t * mu ** 4 * K ** -1.25 * 3.0 ** 0.75 * math.pi * SQRT5 / 30.0 * jet.laplacian_power(2)
            - t * t * mu ** 4 * K ** -2.25 * 3.0 ** 0.75 * SQRT5 / 16.0 * quartic_form_moment(jet)
        )
        terms.append(a4)
    if order >= 5:
        pv8 = pv_weighted_remainder(chart, y, PvSpec.for_weight(8, 0, split_radius))
        # sign fixed by the large-|xi| expansion z^5 Phi_0 ~ c (r^-6 - 5 r^-8), checked against direct quadrature
        terms.append(np.array([-pre * mu ** 5 * 3.0 ** 0.75 * 4.0 * SQRT5 / math.pi * pv8, 0.0, 0.0, 0.0]))
    return terms


def alpha_expansion(chart: CurvatureChart, t: float, mu: float, y, order: int,
                    split_radius: float = 1.0) -> np.ndarray:
    """Sum of the expansion terms up to ``order``."""
    return np.sum(alpha_terms(chart, t, mu, y, order, split_radius), axis=0)


# ----------------------------------------------------------- second correction
def psi_coefficients(jet) -> dict:
    """Coefficients of D^2k(x)^2/2 on the degree-2 harmonics (times |x|^2)."""
    h = jet.hessian()
    lap = np.trace(h)
    c = 2.0 * math.sqrt(math.pi) / math.sqrt(15.0)
    return {
        (1, 2): c * h[0, 1],
        (1, 3): c * h[0, 2],
        (2, 3): c * h[1, 2],
        (2, 2): math.sqrt(math.pi) / math.sqrt(15.0) * (h[1, 1] - h[0, 0]),
        (3, 3): math.sqrt(math.pi) / SQRT5 * (h[2, 2] - lap / 3.0),
    }


def w2_series_coeffs(jet, space: GalerkinSpace) -> np.ndarray:
    """Closed-form mode coefficients of F0^{-1}(int D^2k(y)x^2/2 z^5 .)."""
    out = space.zeros()
    psi = psi_coefficients(jet)
    lap = jet.laplacian_power(1)
    lg = math.lgamma
    for j in range(space.j_max + 1):
        amp = 3.0 ** 1.25 * math.sqrt(math.pi) / 8.0 * math.exp(lg(j + 4.5) - lg(j + 6.0)) * (5.0 + 2.0 * j)
        amp *= mode_norm_const(2, j)
        for lab, v in psi.items():
            out[space.index(2, j, lab)] = amp * v
    out[space.index(0, 0, 1)] = -math.pi * 3.0 ** 0.75 / 16.0 * lap
    for j in range(2, space.j_max + 1):
        out[space.index(0, j, 1)] = (
            3.0 ** 0.25 * math.pi / 4.0 * lap
            * math.exp(lg(j + 2.5) - lg(j + 2.0)) * (1.0 + 2.0 * j) * mode_norm_const(0, j)
            / ((j + 3.0) * (j - 1.0))
        )
    return out


def w2_projection_coeffs(jet, space: GalerkinSpace) -> np.ndarray:
    """The same correction through the generic quadrature projection and F0^{-1}."""
    pts = space.r[:, None, None] * space.angular.nodes[None, :, :]
    quad = 0.5 * np.einsum("...i,ij,...j->...", pts, jet.hessian(), pts)
    return space.f0_inverse(space.project(quad * space.z_nodes[:, None] ** 5))


def w2_series_check(chart: CurvatureChart, y, j_max: int, config: ReductionConfig | None = None) -> float:
    """Largest discrepancy between the closed-form and projected second correction."""
    config = config or ReductionConfig()
    space = GalerkinSpace(
        config.i_max, j_max, radial=RadialRule.tangent(max(128, 4 * j_max)), angular=_angular(config.n_theta, config.n_phi)
    )
    jet = chart.jet_at(y, 2)
    return float(np.max(np.abs(w2_series_coeffs(jet, space) - w2_projection_coeffs(jet, space))))


# ------------------------------------------------------------ diagnostics
def kazdan_warner_residual(chart: CurvatureChart, result: ReductionResult) -> np.ndarray:
    """Integrals of (grad X_j . grad K) u^6 over R^3 for the four conformal Killing directions.

    The directions are the dilation x and the three fields generated by the
    coordinate functions of the sphere, written in the chart; K = 1 + t k.
    Evaluated in bubble coordinates of ``result``.
    """
    sp = result.space
    mu, y, t = result.mu, result.y, result.t
    xi = sp.r[:, None, None] * sp.angular.nodes[None, :, :]
    x = y + mu * xi
    grad_k = np.stack([chart.gradient_chart(a)(x) for a in range(3)], axis=-1)
    u = result.solution_values()
    u6 = u ** 6
    q = 1.0 + np.sum(x * x, axis=-1)
    fields = [x]  # dilation
    for a in range(3):
        e = np.zeros(3)
        e[a] = 1.0
        # gradient of the sphere coordinate 2x_a/(1+|x|^2) up to a conformal factor
        fields.append(0.5 * (q[..., None] * e - 2.0 * x[..., a][..., None] * x))
    out = np.empty(4)
    for n, f in enumerate(fields):
        integrand = t * np.sum(f * grad_k, axis=-1) * u6
        out[n] = sp.integrate(integrand)
    return out
