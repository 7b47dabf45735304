"""Zeros of the reduced map: the concentration point beta(t, mu), the parameter
curve t(mu), and the assembled approximate solutions along it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bubble_space import fit_bubble
from .coefficients import CriticalPointReport, classify
from .curvature_model import CurvatureChart
from .errors import ConvergenceError, DomainError
from .reduction import ReductionConfig, ReductionResult, kazdan_warner_residual, solve_reduction

SQRT5 = math.sqrt(5.0)
# alpha_0 = t mu^4 (1+tk)^(-9/4) GAMMA_SCALE^-1 (a1 + t a2) + ...
GAMMA_SCALE = 30.0 / (math.pi * 3.0 ** 0.75 * SQRT5)
# alpha_{1..3} = -t mu (1+tk)^(-5/4) BETA_SCALE^-1 grad k + ...
BETA_SCALE = 3.0 ** 0.25 * SQRT5 / math.pi


@dataclass(frozen=True)
class CurveConfig:
    """Settings for the nested (t outer, y inner) root finding along a mu grid."""

    mu_grid: tuple = (0.1, 0.05, 0.025, 0.0125)
    alpha_tolerance: float = 1e-8
    t_step_tolerance: float = 1e-13
    y_step_tolerance: float = 1e-13
    max_t_iterations: int = 60
    max_y_iterations: int = 60
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    classify_tol: float = 1e-6

    def __post_init__(self):
        grid = tuple(float(m) for m in self.mu_grid)
        if not grid:
            raise DomainError("mu grid is empty")
        if any(not 0 < m <= 1 for m in grid):
            raise DomainError("mu grid values must lie in (0, 1]")
        if any(b >= a for a, b in zip(grid[:-1], grid[1:])):
            raise DomainError("mu grid must be strictly decreasing")


def geometric_mu_grid(start: float, stop: float, ratio: float = 0.5) -> tuple:
    """start, start*ratio, ... down to the last value >= stop (relative slack 1e-9)."""
    if not (0 < stop <= start <= 1) or not 0 < ratio < 1:
        raise DomainError("geometric grid needs 0 < stop <= start <= 1 and 0 < ratio < 1")
    out = []
    m = start
    while m >= stop * (1.0 - 1e-9):
        out.append(m)
        m *= ratio
    return tuple(out)


@dataclass
class CurveSample:
    mu: float
    t: float
    y: np.ndarray
    alpha: np.ndarray
    alpha_norm: float
    residual: float
    t_iterations: int
    result: ReductionResult = field(repr=False)


@dataclass
class BlowupCurve:
    kind: str  # "M*+" (t -> t*) or "M*0" (t ~ slope * mu)
    samples: list
    extrapolated_t_star: float
    extrapolated_slope: float | None
    fit_exponent: float | None
    predicted: dict

    def rows(self) -> list[tuple]:
        return [
            (s.mu, s.t, float(s.y[0]), float(s.y[1]), float(s.y[2]), s.alpha_norm, s.residual)
            for s in self.samples
        ]


# --------------------------------------------------------------------- beta
def _alpha_hat(alpha: np.ndarray, t: float, mu: float, K0: float) -> np.ndarray:
    return BETA_SCALE / (t * mu) * K0 ** 1.25 * alpha[1:]


def solve_beta(chart: CurvatureChart, t: float, mu: float, config: CurveConfig | None = None,
               y_start=None, initial_w=None) -> tuple[np.ndarray, float, ReductionResult]:
    """Fixed point y <- y + (D^2k(0))^-1 alpha_hat(t, mu, y) for the centre of the bubble.

    Returns (y, max |alpha_1..3|, the reduction at y).
    """
    config = config or CurveConfig()
    if t == 0:
        raise DomainError("the rescaled kernel components are undefined at t = 0")
    jet = chart.jet_at(np.zeros(3), 2)
    hess = jet.hessian()
    if abs(np.linalg.det(hess)) < 1e-12 * max(1.0, np.max(np.abs(hess))) ** 3:
        raise DomainError("Hessian of k at the critical point is singular")
    K0 = 1.0 + t * jet.value
    y = np.zeros(3) if y_start is None else np.asarray(y_start, dtype=float).copy()
    w = initial_w
    for _ in range(config.max_y_iterations):
        res = solve_reduction(chart, t, mu, y, config.reduction, initial=w)
        w = res.w_coeffs
        if not np.any(res.alpha[1:]):
            return y, 0.0, res
        step = np.linalg.solve(hess, _alpha_hat(res.alpha, t, mu, K0))
        y = y + step
        if np.max(np.abs(step)) < config.y_step_tolerance:
            res = solve_reduction(chart, t, mu, y, config.reduction, initial=w)
            return y, float(np.max(np.abs(res.alpha[1:]))), res
    raise ConvergenceError("concentration point iteration did not converge", last=y.tolist())


# ---------------------------------------------------------------- t curve
def _gamma(chart, t, mu, res: ReductionResult) -> float:
    K = 1.0 + t * chart.value(res.y)
    return GAMMA_SCALE * K ** 2.25 / (t * mu ** 4) * res.alpha[0]


def solve_t(chart: CurvatureChart, mu: float, t_start: float, a2: float, config: CurveConfig | None = None):
    """Root of gamma(., mu) with beta solved inside every evaluation.

    The first step is t <- t - gamma/a2; later steps replace a2 by the secant
    slope of gamma, which is a2 + o(1) and converges in a handful of steps.
    """
    config = config or CurveConfig()
    if abs(a2) < 1e-12:
        raise DomainError("a2 vanishes: the t-curve is degenerate")
    lo, hi = config.reduction.t_range
    t = float(t_start)
    if t == 0:
        t = 1e-3 * mu
    prev = None
    y = None
    w = None
    for it in range(1, config.max_t_iterations + 1):
        y, _, res = solve_beta(chart, t, mu, config, y_start=y, initial_w=w)
        w = res.w_coeffs
        g = _gamma(chart, t, mu, res)
        slope = a2
        if prev is not None and prev[0] != t:
            slope = (g - prev[1]) / (t - prev[0])
            if slope == 0 or not math.isfinite(slope):
                slope = a2
        step = g / slope
        prev = (t, g)
        t_new = t - step
        if not lo <= t_new <= hi:
            raise ConvergenceError(f"t iteration left the range [{lo}, {hi}]", last=t_new)
        if t_new == 0:
            t_new = 0.5 * t
        if abs(step) <= config.t_step_tolerance * max(1.0, abs(t)):
            y, _, res = solve_beta(chart, t_new, mu, config, y_start=y, initial_w=w)
            return t_new, y, res, it
        t = t_new
    raise ConvergenceError("t iteration did not converge", last=t)


def _richardson(mus, values) -> tuple[float, float | None]:
    """Limit at mu = 0 assuming values = L + c mu^q on a geometric grid.

    q comes from the last three points; with fewer points a linear rate is assumed.
    """
    v = np.asarray(values, dtype=float)
    m = np.asarray(mus, dtype=float)
    if v.size == 1:
        return float(v[0]), None
    ratio = m[-2] / m[-1]
    q = 1.0
    if v.size >= 3:
        d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
        if d1 != 0 and d2 != 0 and d1 / d2 > 0:
            q = math.log(d1 / d2) / math.log(ratio)
        else:
            return float(v[-1]), None
    factor = ratio ** q - 1.0
    return float(v[-1] + (v[-1] - v[-2]) / factor), float(q)


def predict(chart: CurvatureChart, report: CriticalPointReport | None = None, tol: float = 1e-6) -> dict:
    """Leading-order blow-up prediction from the coefficients at the origin."""
    report = report or classify(chart, tol=tol)
    c = report.coefficients
    if c is None:
        return {"kind": "none", "reason": "origin is not a nondegenerate critical point"}
    if not report.in_A:
        return {"kind": "none", "reason": "Laplacian of k does not vanish at the critical point"}
    if not report.in_M:
        if abs(c.a2) > abs(c.a0):
            return {"kind": "none", "reason": "a0 != 0: solutions stay bounded"}
        return {"kind": "none", "reason": "a0 != 0 or a2 = 0: no blow-up curve"}
    if report.in_M_star_plus:
        return {"kind": "M*+", "t_star": -c.a1 / c.a2, "a1": c.a1, "a2": c.a2}
    if report.in_M_star_zero:
        return {"kind": "M*0", "slope": -c.a3 / c.a2, "a2": c.a2, "a3": c.a3}
    return {"kind": "none", "reason": f"-a1/a2 = {-c.a1 / c.a2:.6g} outside (0, 1]: no admissible positive-t curve"}


def solve_t_curve(chart: CurvatureChart, mu_grid=None, config: CurveConfig | None = None) -> BlowupCurve:
    """Samples (mu, t(mu), beta) of the blow-up curve and its limit as mu -> 0."""
    config = config or CurveConfig()
    if mu_grid is not None:
        config = CurveConfig(**{**config.__dict__, "mu_grid": tuple(mu_grid)})
    pred = predict(chart, tol=config.classify_tol)
    if pred["kind"] == "none":
        raise DomainError(pred["reason"])
    a2 = pred["a2"]
    samples: list[CurveSample] = []
    for mu in config.mu_grid:
        if pred["kind"] == "M*+":
            guess = pred["t_star"]
        else:
            guess = pred["slope"] * mu
        if len(samples) >= 2:
            # linear continuation in mu from the last two samples
            (m1, t1), (m2, t2) = (samples[-2].mu, samples[-2].t), (samples[-1].mu, samples[-1].t)
            guess = t2 + (t2 - t1) * (mu - m2) / (m2 - m1)
        elif samples:
            guess = samples[-1].t * (mu / samples[-1].mu if pred["kind"] == "M*0" else 1.0)
        t, y, res, its = solve_t(chart, mu, guess, a2, config)
        norm = float(np.linalg.norm(res.alpha))
        if norm >= config.alpha_tolerance:
            raise ConvergenceError(f"curve sample at mu={mu} has |alpha| = {norm:.3e}", last=norm)
        samples.append(CurveSample(mu, t, y, res.alpha.copy(), norm, res.residual, its, res))
    mus = [s.mu for s in samples]
    ts = [s.t for s in samples]
    if pred["kind"] == "M*+":
        t_star, q = _richardson(mus, ts)
        return BlowupCurve("M*+", samples, t_star, None, q, pred)
    slopes = [t / m for t, m in zip(ts, mus)]
    slope, _ = _richardson(mus, slopes)
    exponent = None
    if len(samples) >= 2 and all(t != 0 for t in ts) and len({math.copysign(1, t) for t in ts}) == 1:
        exponent = float(np.polyfit(np.log(mus), np.log(np.abs(ts)), 1)[0])
    return BlowupCurve("M*0", samples, 0.0, slope, exponent, pred)


# ------------------------------------------------------------- solutions
@dataclass
class AssembledSolution:
    t: float
    mu: float
    y: np.ndarray
    values: np.ndarray = field(repr=False)
    min_value: float
    positive: bool
    scaled_bubble_distance: float
    fitted_bubble: dict
    kazdan_warner: np.ndarray
    reduction_residual: float
    alpha: np.ndarray


def assemble_solution(chart: CurvatureChart, t: float, mu: float, config: CurveConfig | None = None,
                      y=None, result: ReductionResult | None = None) -> AssembledSolution:
    """u = (1+tk(y))^(-1/4) z + w on the node grid with its diagnostics.

    Values are in bubble coordinates; u(x) = mu^(-1/2) values((x - y)/mu).
    """
    config = config or CurveConfig()
    if result is None:
        if y is None:
            y = solve_beta(chart, t, mu, config)[0] if t != 0 else np.zeros(3)
        result = solve_reduction(chart, t, mu, y, config.reduction)
    sp = result.space
    values = result.solution_values()
    min_u = float(np.min(values))
    # Dirichlet distance to the scaled bubble is the norm of w (modes are orthonormal)
    dist = float(np.linalg.norm(result.w_coeffs))
    coeffs = result.w_coeffs.copy()
    coeffs[sp.index(0, 0, 1)] += (1.0 + result.w0_scale) * sp.z_coeff
    norm_sq = float(coeffs @ coeffs)
    fit = fit_bubble(sp, values, norm_sq, start=(1.0, (0.0, 0.0, 0.0), 1.0 + result.w0_scale))
    fitted = {
        "mu": result.mu * fit["mu"],
        "y": (result.y + result.mu * np.asarray(fit["y"])).tolist(),
        "scale": fit["scale"],
        "distance": fit["distance"],
    }
    kw = kazdan_warner_residual(chart, result)
    return AssembledSolution(
        t=result.t,
        mu=result.mu,
        y=result.y.copy(),
        values=values,
        min_value=min_u,
        positive=bool(min_u > 0),
        scaled_bubble_distance=dist,
        fitted_bubble=fitted,
        kazdan_warner=kw,
        reduction_residual=result.residual,
        alpha=result.alpha.copy(),
    )
