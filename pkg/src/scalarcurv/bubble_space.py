"""Bubbles, their tangent frame and the spectral basis of the bubble Hessian.

All integrals are evaluated in the bubble's own coordinates x = y + mu * xi, where
the basis functions do not depend on (mu, y).  A basis function is
R_{i,j}(r) Y_{i,l}(x/|x|) with

    R_{i,j}(r) = a_{i,j} r^i (1+r^2)^(-1/2-i) P_j^{(i+1/2, i+1/2)}(1 - 2/(1+r^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import lpmv

from .errors import ConvergenceError, DomainError
from .quadrature import AngularRule, RadialRule, compensated_sum
from .special_functions import (
    eigenvalue,
    harmonic_multiplicity,
    jacobi_derivative_table,
    jacobi_table,
    mode_norm_const,
)

BUBBLE_CONST = 3.0 ** 0.25
BUBBLE_NORM_SQ = 3.0 * math.sqrt(3.0) * math.pi ** 2 / 4.0
TAU1_SQ = math.gamma(5.0) / (math.pi ** 1.5 * math.gamma(3.5) * 3.0)
TAU0_SQ = 4.0 * math.gamma(3.0) / (math.pi ** 1.5 * math.gamma(1.5) * 3.0 * 5.0)

_Y2_ORDER = ((1, 2), (1, 3), (2, 3), (2, 2), (3, 3))


@dataclass(frozen=True)
class Bubble:
    mu: float
    y: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError("bubble scale mu must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.y, dtype=float)
        return BUBBLE_CONST * math.sqrt(self.mu) / np.sqrt(self.mu ** 2 + np.sum(d * d, axis=-1))

    def scaled(self, x) -> np.ndarray:
        """Bubble-frame coordinates (x - y)/mu."""
        return (np.asarray(x, dtype=float) - np.asarray(self.y, dtype=float)) / self.mu


def harmonic_labels(i: int) -> list:
    if i == 1:
        return [1, 2, 3]
    if i == 2:
        return list(_Y2_ORDER)
    return list(range(1, 2 * i + 2))


def harmonic_basis(i: int, directions) -> np.ndarray:
    """Real L2-orthonormal spherical harmonics of degree i at unit vectors, shape (2i+1, n).

    Degrees 1 and 2 use the Cartesian basis x_l and the (l1, l2) quadratic basis
    with the ordering of :func:`harmonic_labels`; higher degrees use real
    associated-Legendre harmonics.
    """
    w = np.atleast_2d(np.asarray(directions, dtype=float))
    x1, x2, x3 = w[:, 0], w[:, 1], w[:, 2]
    if i == 0:
        return np.full((1, w.shape[0]), 1.0 / math.sqrt(4.0 * math.pi))
    if i == 1:
        return math.sqrt(3.0 / (4.0 * math.pi)) * w.T.copy()
    if i == 2:
        c = math.sqrt(15.0 / (8.0 * math.pi))
        comps = {1: x1, 2: x2, 3: x3}
        rows = []
        for l1, l2 in _Y2_ORDER:
            if l1 < l2:
                rows.append(math.sqrt(2.0) * comps[l1] * comps[l2])
            else:
                lower = sum(comps[m] ** 2 for m in range(1, l1))
                rows.append(math.sqrt((l1 - 1.0) / l1) * (comps[l1] ** 2 - lower / (l1 - 1.0)))
        return c * np.array(rows)
    cos_t = np.clip(x3, -1.0, 1.0)
    phi = np.arctan2(x2, x1)
    rows = []
    for m in range(-i, i + 1):
        am = abs(m)
        norm = math.sqrt((2 * i + 1) / (4.0 * math.pi) * math.exp(math.lgamma(i - am + 1) - math.lgamma(i + am + 1)))
        leg = lpmv(am, i, cos_t)
        if m == 0:
            rows.append(norm * leg)
        elif m > 0:
            rows.append(math.sqrt(2.0) * norm * leg * np.cos(am * phi))
        else:
            rows.append(math.sqrt(2.0) * norm * leg * np.sin(am * phi))
    return np.array(rows)


@dataclass(frozen=True)
class SpectralMode:
    i: int
    j: int
    l: object

    @property
    def sigma(self) -> float:
        return 0.5 + self.i

    @property
    def eigenvalue(self) -> float:
        return eigenvalue(self.i, self.j)

    @property
    def norm_const(self) -> float:
        return mode_norm_const(self.i, self.j)

    @property
    def is_kernel(self) -> bool:
        return self.i + self.j == 1


def radial_profile(i: int, j_max: int, r) -> np.ndarray:
    """Rows R_{i,0..j_max}(r)."""
    r = np.asarray(r, dtype=float)
    q = 1.0 + r * r
    xi = 1.0 - 2.0 / q
    base = r ** i * q ** (-0.5 - i)
    jac = jacobi_table(j_max, 0.5 + i, xi)
    norms = np.array([mode_norm_const(i, j) for j in range(j_max + 1)])
    return norms.reshape((-1,) + (1,) * r.ndim) * jac * base


def radial_profile_derivative(i: int, j_max: int, r) -> np.ndarray:
    """Rows d/dr R_{i,0..j_max}(r) for 1-d ``r``."""
    r = np.asarray(r, dtype=float)
    q = 1.0 + r * r
    xi = 1.0 - 2.0 / q
    base = r ** i * q ** (-0.5 - i)
    dbase = (i * r ** max(i - 1, 0) * (1.0 if i > 0 else 0.0)) * q ** (-0.5 - i) - (1.0 + 2.0 * i) * r ** (i + 1) * q ** (
        -1.5 - i
    )
    dxi = 4.0 * r / (q * q)
    jac = jacobi_table(j_max, 0.5 + i, xi)
    djac = jacobi_derivative_table(j_max, 0.5 + i, xi)
    norms = np.array([mode_norm_const(i, j) for j in range(j_max + 1)])[:, None]
    return norms * (djac * dxi[None, :] * base[None, :] + jac * dbase[None, :])


def mode_eval(mode: SpectralMode, bubble: Bubble, x) -> np.ndarray:
    """Phi^{mu,y}_{i,j,l}(x) = mu^(-1/2) Phi_{i,j,l}((x - y)/mu)."""
    xi = bubble.scaled(x)
    r = np.sqrt(np.sum(xi * xi, axis=-1))
    flat_r = np.atleast_1d(r).ravel()
    flat_xi = np.atleast_2d(xi).reshape(-1, 3)
    safe = np.where(flat_r > 0, flat_r, 1.0)
    dirs = flat_xi / safe[:, None]
    dirs[flat_r == 0] = (0.0, 0.0, 1.0)
    labels = harmonic_labels(mode.i)
    row = labels.index(mode.l)
    ang = harmonic_basis(mode.i, dirs)[row]
    rad = radial_profile(mode.i, mode.j, flat_r)[mode.j]
    out = rad * ang / math.sqrt(bubble.mu)
    return out.reshape(np.shape(r)) if np.ndim(r) else float(out[0])


def tangent_frame(bubble: Bubble, x) -> np.ndarray:
    """The four orthonormal tangent vectors at x, shape (4,) + x.shape[:-1]; index 0 is the scale direction."""
    xi = bubble.scaled(x)
    q = 1.0 + np.sum(xi * xi, axis=-1)
    s = 1.0 / math.sqrt(bubble.mu)
    out = [s * math.sqrt(TAU0_SQ) * q ** -0.5 * (1.0 - 2.0 / q)]
    for a in range(3):
        out.append(s * math.sqrt(TAU1_SQ) * q ** -1.5 * xi[..., a])
    return np.array(out)


@dataclass
class GalerkinSpace:
    """Truncated eigenbasis, sampled on a product quadrature rule in bubble coordinates.

    Coefficient vectors are flat, ordered by i, then j, then the harmonic label.
    """

    i_max: int = 4
    j_max: int = 12
    radial: RadialRule = field(default_factory=lambda: RadialRule.tangent(128))
    angular: AngularRule = field(default_factory=lambda: AngularRule.product(32, 64))

    def __post_init__(self):
        if self.i_max < 1 or self.j_max < 1:
            raise DomainError("truncation must retain the tangent modes (i_max, j_max >= 1)")
        self.modes: list[SpectralMode] = []
        self.offsets: list[int] = []
        for i in range(self.i_max + 1):
            self.offsets.append(len(self.modes))
            for j in range(self.j_max + 1):
                for l in harmonic_labels(i):
                    self.modes.append(SpectralMode(i, j, l))
        self.size = len(self.modes)
        self.eigenvalues = np.array([m.eigenvalue for m in self.modes])
        self.kernel_mask = np.array([m.is_kernel for m in self.modes])
        # alpha index 0 <-> (0,1,1); 1..3 <-> (1,0,l)
        self.kernel_index = [
            self.index(0, 1, 1),
            self.index(1, 0, 1),
            self.index(1, 0, 2),
            self.index(1, 0, 3),
        ]
        r = self.radial.nodes
        self.r = r
        self.radial_weights = self.radial.weights * r * r
        self.Y = [harmonic_basis(i, self.angular.nodes) for i in range(self.i_max + 1)]
        self.R = [radial_profile(i, self.j_max, r) for i in range(self.i_max + 1)]
        self.z_nodes = BUBBLE_CONST / np.sqrt(1.0 + r * r)  # radial only
        self.z_coeff = math.sqrt(BUBBLE_NORM_SQ)  # z = |z| Phi_{0,0,1}

    # ------------------------------------------------------------- indexing
    def index(self, i: int, j: int, l) -> int:
        labels = harmonic_labels(i)
        return self.offsets[i] + j * len(labels) + labels.index(l)

    def block(self, coeffs: np.ndarray, i: int) -> np.ndarray:
        """View of the (j, l) coefficient block for degree i."""
        c = 2 * i + 1
        start = self.offsets[i]
        return coeffs[start : start + (self.j_max + 1) * c].reshape(self.j_max + 1, c)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    # ------------------------------------------------------------ transforms
    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Values on the (radial, angular) node grid of sum_m c_m Phi_m."""
        out = np.zeros((self.r.size, self.angular.nodes.shape[0]))
        for i in range(self.i_max + 1):
            blk = self.block(coeffs, i)
            if not np.any(blk):
                continue
            out += (self.R[i].T @ blk) @ self.Y[i]
        return out

    def project(self, values: np.ndarray) -> np.ndarray:
        """Integrals of values * Phi_m over R^3 for every retained mode."""
        h = self.angular.half
        aw = self.angular.weights[:h]
        out = np.zeros(self.size)
        for i in range(self.i_max + 1):
            yw = self.Y[i]
            # antipodal pairing: Y_i(-x) = (-1)^i Y_i(x)
            sign = -1.0 if i % 2 else 1.0
            paired = values[:, :h] + sign * values[:, h:]
            ang = paired @ (yw[:, :h] * aw[None, :]).T  # (nr, 2i+1)
            blk = (self.R[i] * self.radial_weights[None, :]) @ ang
            start = self.offsets[i]
            out[start : start + blk.size] = blk.ravel()
        return out

    def integrate(self, values: np.ndarray) -> float:
        return compensated_sum(self.angular.integrate(values) * self.radial_weights)

    # -------------------------------------------------------------- operators
    def hessian_apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.eigenvalues * coeffs

    def f0_inverse(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.zeros_like(coeffs)
        keep = ~self.kernel_mask
        out[keep] = coeffs[keep] / self.eigenvalues[keep]
        return out

    def kernel_part(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs[self.kernel_index]

    # ------------------------------------------------------------ diagnostics
    def rayleigh_defect(self) -> np.ndarray:
        """Matrix <Phi_m,Phi_n> - 5 int z^4 Phi_m Phi_n - lambda_m delta_mn, by quadrature."""
        r = self.r
        w = self.radial.weights
        z4 = self.z_nodes ** 4
        mats = []
        n = self.size
        out = np.zeros((n, n))
        gram_y = []
        for i in range(self.i_max + 1):
            yi = self.Y[i]
            gram_y.append([self.angular.integrate(yi[:, None, :] * self.Y[k][None, :, :]) for k in range(self.i_max + 1)])
        for i in range(self.i_max + 1):
            dR = radial_profile_derivative(i, self.j_max, r)
            for k in range(self.i_max + 1):
                dRk = radial_profile_derivative(k, self.j_max, r)
                grad_rad = (dR * (w * r * r)) @ dRk.T
                plain = (self.R[i] * w) @ self.R[k].T  # int R R dr, multiplies surface gradient term
                pot = (self.R[i] * (w * r * r * z4)) @ self.R[k].T
                gy = gram_y[i][k]
                dir_form = np.kron(grad_rad, gy) + k * (k + 1) * np.kron(plain, gy)
                block = dir_form - 5.0 * np.kron(pot, gy)
                si, sk = self.offsets[i], self.offsets[k]
                out[si : si + block.shape[0], sk : sk + block.shape[1]] = block
        out -= np.diag(self.eigenvalues)
        return out


def fit_bubble(space: GalerkinSpace, values: np.ndarray, norm_sq: float, start=(1.0, (0.0, 0.0, 0.0), 1.0),
               tol: float = 1e-12, max_iter: int = 50) -> dict:
    """Closest multiple of a bubble to u in the Dirichlet norm, by Gauss-Newton.

    ``values`` samples u on the space's node grid (bubble coordinates of the space)
    and ``norm_sq`` is its squared Dirichlet norm.  Inner products with bubbles use
    <u, z_p> = int u z_p^5 and <u, dz_p> = int 5 z_p^4 dz_p u.
    """
    pts = space.r[:, None, None] * space.angular.nodes[None, :, :]
    mu, y, c = float(start[0]), np.asarray(start[1], dtype=float), float(start[2])
    for it in range(max_iter):
        d = pts - y
        dd = mu * mu + np.sum(d * d, axis=-1)
        z = BUBBLE_CONST * math.sqrt(mu) * dd ** -0.5
        dz = [BUBBLE_CONST * (0.5 / math.sqrt(mu) * dd ** -0.5 - mu ** 1.5 * dd ** -1.5)]
        for a in range(3):
            dz.append(BUBBLE_CONST * math.sqrt(mu) * d[..., a] * dd ** -1.5)
        z4 = 5.0 * z ** 4
        gram = np.array([[space.integrate(z4 * dz[p] * dz[q]) for q in range(4)] for p in range(4)])
        b_c = space.integrate(z ** 5 * values) - c * BUBBLE_NORM_SQ
        b_p = np.array([c * space.integrate(z4 * dz[p] * values) for p in range(4)])
        step_c = b_c / BUBBLE_NORM_SQ
        step_p = np.linalg.solve(c * c * gram, b_p)
        c += step_c
        mu += step_p[0]
        y = y + step_p[1:]
        if mu <= 0:
            raise ConvergenceError("bubble fit left the admissible region (mu <= 0)", last=(mu, y, c))
        if abs(step_c) + np.max(np.abs(step_p)) < tol:
            break
    else:
        raise ConvergenceError("bubble fit did not converge", last=(mu, y.tolist(), c))
    d = pts - y
    z = BUBBLE_CONST * math.sqrt(mu) * (mu * mu + np.sum(d * d, axis=-1)) ** -0.5
    overlap = space.integrate(z ** 5 * values)
    dist_sq = norm_sq - 2.0 * c * overlap + c * c * BUBBLE_NORM_SQ
    dz = [BUBBLE_CONST * (0.5 / math.sqrt(mu) * (mu * mu + np.sum(d * d, axis=-1)) ** -0.5
                          - mu ** 1.5 * (mu * mu + np.sum(d * d, axis=-1)) ** -1.5)]
    # tangent projections of the residual, normalised by the tangent norms
    dd = mu * mu + np.sum(d * d, axis=-1)
    tangents = dz + [BUBBLE_CONST * math.sqrt(mu) * d[..., a] * dd ** -1.5 for a in range(3)]
    proj = []
    for t in tangents:
        tn = math.sqrt(space.integrate(5.0 * z ** 4 * t * t))
        proj.append(space.integrate(5.0 * z ** 4 * t * values) / tn)
    return {
        "mu": mu,
        "y": y,
        "scale": c,
        "distance": math.sqrt(max(dist_sq, 0.0)),
        "tangent_projection": np.array(proj),
        "iterations": it + 1,
    }
