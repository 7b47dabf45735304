"""Blow-up analysis for the prescribed scalar curvature problem on the three-sphere.

The public entry points are re-exported here; see the submodules for details.
"""

from .blowup import BlowupCurve, CurveConfig, assemble_solution, predict, solve_beta, solve_t_curve
from .bubble_space import Bubble, GalerkinSpace, SpectralMode, fit_bubble
from .coefficients import CoefficientSet, CriticalPointReport, classify, compute_coefficients, compute_degree
from .curvature_model import CurvatureChart, ExampleFamily, TaylorJet, load_chart
from .errors import ConvergenceError, DomainError, ScalarCurvError, SpecError
from .reduction import ReductionConfig, ReductionResult, alpha_expansion, solve_reduction

__all__ = [
    "BlowupCurve",
    "Bubble",
    "CoefficientSet",
    "ConvergenceError",
    "CriticalPointReport",
    "CurvatureChart",
    "CurveConfig",
    "DomainError",
    "ExampleFamily",
    "GalerkinSpace",
    "ReductionConfig",
    "ReductionResult",
    "ScalarCurvError",
    "SpecError",
    "SpectralMode",
    "TaylorJet",
    "alpha_expansion",
    "assemble_solution",
    "classify",
    "compute_coefficients",
    "compute_degree",
    "fit_bubble",
    "load_chart",
    "predict",
    "solve_beta",
    "solve_reduction",
    "solve_t_curve",
]
