"""Command-line front end.

Exit codes: 0 success, 1 malformed input, 2 domain error, 3 non-convergence.
Floats are written with 17 significant digits and keys in a fixed order, so
identical invocations produce byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .blowup import CurveConfig, assemble_solution, geometric_mu_grid, predict, solve_t_curve
from .coefficients import classify, compute_coefficients
from .curvature_model import CurvatureChart, ExampleFamily, load_chart
from .errors import ScalarCurvError, SpecError
from .identities import run_battery
from .reduction import ReductionConfig, alpha_expansion, solve_reduction
from .special_functions import eigenvalue_fraction, harmonic_multiplicity, mode_norm_const

THREADS_ENV = "SCALARCURV_THREADS"


# ------------------------------------------------------------------ output
def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    if x == 0:
        return "0.0"
    text = format(x, ".17g")
    # keep integral floats recognisably floating point
    return text if any(c in text for c in ".en") else text + ".0"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with 17-significant-digit floats; dict order is kept as given."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [pad + json.dumps(str(k)) + ": " + dumps(v, indent, _level + 1) for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


# ------------------------------------------------------------- arguments
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(f"arguments: {message}")


def _float_list(text: str, field: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise SpecError(f"{field}: expected comma-separated numbers, got {text!r}") from exc


def parse_mu_grid(text: str) -> tuple:
    """``start:stop:geom`` (halving) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3 or parts[2] != "geom":
            raise SpecError(f"--mu-grid: expected start:stop:geom, got {text!r}")
        try:
            start, stop = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise SpecError(f"--mu-grid: bad number in {text!r}") from exc
        if not (0 < stop <= start <= 1):
            raise SpecError("--mu-grid: values must satisfy 0 < stop <= start <= 1")
        return geometric_mu_grid(start, stop)
    grid = tuple(_float_list(text, "--mu-grid"))
    if not grid or any(not 0 < m <= 1 for m in grid):
        raise SpecError("--mu-grid: values must lie in (0, 1]")
    return grid


def _chart_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["example"], help="built-in chart family")
    p.add_argument("--a", type=float, help="example-family parameter a")
    p.add_argument("--b", type=float, help="example-family parameter b")
    p.add_argument("--chart", help="chart as inline JSON or a path to a JSON file")


def _chart_from_args(args) -> CurvatureChart:
    has_family = args.family is not None
    has_chart = args.chart is not None
    if has_family == has_chart:
        raise SpecError("chart: give exactly one of --family or --chart")
    if has_chart:
        if args.a is not None or args.b is not None:
            raise SpecError("--a/--b: only valid with --family")
        return load_chart(args.chart)
    if args.a is None or args.b is None:
        raise SpecError("--a/--b: the example family needs both parameters")
    try:
        return ExampleFamily(args.a, args.b).chart()
    except ScalarCurvError as exc:
        raise SpecError(f"--a/--b: {exc}") from exc


def _reduction_config(args) -> ReductionConfig:
    lo, hi = _float_list(args.t_range, "--t-range") if args.t_range else (-0.5, 1.0)
    try:
        return ReductionConfig(
            t_range=(lo, hi),
            tolerance=args.tolerance,
            i_max=args.i_max,
            j_max=args.j_max,
            modes_per_inverse_mu=args.modes_per_inverse_mu,
        )
    except ScalarCurvError as exc:
        raise SpecError(f"reduction options: {exc}") from exc


def _reduction_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tolerance", type=float, default=1e-11)
    p.add_argument("--i-max", type=int, default=4)
    p.add_argument("--j-max", type=int, default=None, help="fixed radial truncation (default grows like 1/mu)")
    p.add_argument("--modes-per-inverse-mu", type=float, default=12.0)
    p.add_argument("--t-range", default=None, help="lo,hi admissible t interval")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scalarcurv", description="Blow-up analysis for prescribed scalar curvature on S^3.")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None, help="write here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("coeffs", help="coefficients a0..a3 at the origin")
    _chart_args(c)
    c.add_argument("--split-radius", type=float, default=1.0)

    c = sub.add_parser("classify", help="critical-point classification at the origin")
    _chart_args(c)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--split-radius", type=float, default=1.0)

    c = sub.add_parser("spectrum", help="eigenvalues, multiplicities and normalisations")
    c.add_argument("--i-max", type=int, default=4)
    c.add_argument("--j-max", type=int, default=12)

    sub.add_parser("identities", help="closed-form integral identity battery")

    c = sub.add_parser("reduce", help="solve the reduction at given (t, mu, y)")
    _chart_args(c)
    c.add_argument("--t", required=True, help="comma-separated t values")
    c.add_argument("--mu", required=True, help="comma-separated mu values")
    c.add_argument("--y", default="0,0,0", help="bubble centre y1,y2,y3")
    c.add_argument("--order", type=int, default=None, help="expansion order to compare against (1..5)")
    _reduction_args(c)

    c = sub.add_parser("curve", help="trace the blow-up curve over a mu grid")
    _chart_args(c)
    c.add_argument("--mu-grid", default="0.1:0.0125:geom")
    c.add_argument("--diagnostics", action="store_true", help="add solution diagnostics to JSON output")
    _reduction_args(c)
    return p


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise SpecError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}") from exc
    if n < 1:
        raise SpecError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}")
    return n


# -------------------------------------------------------------- commands
def _coefficients_dict(cs) -> dict:
    out = {"a0": cs.a0, "a1": cs.a1, "a2": cs.a2, "a3": cs.a3}
    out["pieces"] = dict(cs.pieces)
    return out


def cmd_coeffs(args, chart):
    if args.split_radius <= 0:
        raise SpecError("--split-radius: must be positive")
    cs = compute_coefficients(chart, split_radius=args.split_radius)
    data = {"command": "coeffs", **_coefficients_dict(cs), "chart": chart.to_json_dict()}
    rows = [["a0", cs.a0], ["a1", cs.a1], ["a2", cs.a2], ["a3", cs.a3]]
    return data, (["name", "value"], rows)


def cmd_classify(args, chart):
    if args.split_radius <= 0:
        raise SpecError("--split-radius: must be positive")
    rep = classify(chart, tol=args.tol, split_radius=args.split_radius)
    data = {
        "command": "classify",
        "center": list(rep.center),
        "gradient": list(rep.gradient),
        "laplacian": rep.laplacian,
        "hessian": [list(r) for r in rep.hessian],
        "hessian_invertible": rep.hessian_invertible,
        "morse_index": rep.morse_index,
        "coefficients": None if rep.coefficients is None else _coefficients_dict(rep.coefficients),
        "in_A": rep.in_A,
        "in_M": rep.in_M,
        "in_M_star": rep.in_M_star,
        "in_M_star_plus": rep.in_M_star_plus,
        "in_M_star_zero": rep.in_M_star_zero,
        "boundary_case": rep.boundary_case,
        "crit_minus": rep.crit_minus,
        "predicted_t_star": rep.predicted_t_star,
        "prediction": predict(chart, rep, tol=args.tol),
        "chart": chart.to_json_dict(),
    }
    keys = ["laplacian", "morse_index", "in_A", "in_M", "in_M_star", "in_M_star_plus", "in_M_star_zero",
            "boundary_case", "crit_minus", "predicted_t_star"]
    rows = [[k, data[k]] for k in keys]
    return data, (["name", "value"], rows)


def cmd_spectrum(args, _chart):
    if args.i_max < 0 or args.j_max < 0:
        raise SpecError("--i-max/--j-max: must be nonnegative")
    modes = []
    rows = []
    for i in range(args.i_max + 1):
        for j in range(args.j_max + 1):
            lam = eigenvalue_fraction(i, j)
            entry = {
                "i": i,
                "j": j,
                "eigenvalue": float(lam),
                "eigenvalue_exact": f"{lam.numerator}/{lam.denominator}",
                "multiplicity": harmonic_multiplicity(i),
                "norm_const": mode_norm_const(i, j),
                "kernel": i + j == 1,
            }
            modes.append(entry)
            rows.append([i, j, float(lam), entry["eigenvalue_exact"], entry["multiplicity"], entry["norm_const"]])
    return {"command": "spectrum", "modes": modes}, (
        ["i", "j", "eigenvalue", "eigenvalue_exact", "multiplicity", "norm_const"],
        rows,
    )


def cmd_identities(args, _chart):
    checks = run_battery()
    data = {
        "command": "identities",
        "passed": all(c.passed for c in checks),
        "checks": [{"name": c.name, "max_error": c.max_error, "tolerance": c.tolerance, "passed": c.passed} for c in checks],
    }
    rows = [[c.name, c.max_error, c.tolerance, c.passed] for c in checks]
    return data, (["name", "max_error", "tolerance", "passed"], rows)


def _reduce_one(chart, t, mu, y, config, order):
    res = solve_reduction(chart, t, mu, y, config)
    i_max, j_max, n_radial = config.truncation(mu)
    entry = {
        "t": t,
        "mu": mu,
        "y": list(y),
        "alpha": res.alpha.tolist(),
        "residual": res.residual,
        "iterations": res.iterations,
        "w0_scale": res.w0_scale,
        "w_norm": float(np.linalg.norm(res.w_coeffs)),
        "truncation": {"i_max": i_max, "j_max": j_max, "radial_nodes": n_radial},
    }
    if order is not None:
        expansion = alpha_expansion(chart, t, mu, y, order)
        entry["expansion_order"] = order
        entry["alpha_expansion"] = expansion.tolist()
        entry["expansion_difference"] = float(np.linalg.norm(res.alpha - expansion))
    return entry


def cmd_reduce(args, chart):
    config = _reduction_config(args)
    ts = _float_list(args.t, "--t")
    mus = _float_list(args.mu, "--mu")
    y = _float_list(args.y, "--y")
    if len(y) != 3:
        raise SpecError("--y: expected three components")
    if args.order is not None and not 1 <= args.order <= 5:
        raise SpecError("--order: must be between 1 and 5")
    tasks = [(t, mu) for t in ts for mu in mus]
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(tasks))) as pool:
        futures = [pool.submit(_reduce_one, chart, t, mu, y, config, args.order) for t, mu in tasks]
        results = [f.result() for f in futures]  # gathered in submission order
    rows = [[r["t"], r["mu"], *r["alpha"], r["residual"], r["iterations"]] for r in results]
    return {"command": "reduce", "results": results, "chart": chart.to_json_dict()}, (
        ["t", "mu", "alpha0", "alpha1", "alpha2", "alpha3", "residual", "iterations"],
        rows,
    )


def cmd_curve(args, chart):
    grid = parse_mu_grid(args.mu_grid)
    config = CurveConfig(mu_grid=grid, reduction=_reduction_config(args))
    curve = solve_t_curve(chart, config=config)
    samples = []
    for s in curve.samples:
        entry = {
            "mu": s.mu,
            "t": s.t,
            "y": s.y.tolist(),
            "alpha": s.alpha.tolist(),
            "alpha_norm": s.alpha_norm,
            "residual": s.residual,
            "t_over_mu": s.t / s.mu,
        }
        if args.diagnostics:
            sol = assemble_solution(chart, s.t, s.mu, config, result=s.result)
            entry["diagnostics"] = {
                "min_u": sol.min_value,
                "positive": sol.positive,
                "scaled_bubble_distance": sol.scaled_bubble_distance,
                "distance_over_mu_sq": sol.scaled_bubble_distance / s.mu ** 2,
                "fitted_mu": sol.fitted_bubble["mu"],
                "fitted_y": sol.fitted_bubble["y"],
                "fitted_distance": sol.fitted_bubble["distance"],
                "kazdan_warner": sol.kazdan_warner.tolist(),
            }
        samples.append(entry)
    data = {
        "command": "curve",
        "kind": curve.kind,
        "prediction": curve.predicted,
        "extrapolated_t_star": curve.extrapolated_t_star,
        "extrapolated_slope": curve.extrapolated_slope,
        "fit_exponent": curve.fit_exponent,
        "samples": samples,
        "chart": chart.to_json_dict(),
    }
    rows = [list(r) for r in curve.rows()]
    # limit row: mu = 0 carries the extrapolated t*
    rows.append([0.0, curve.extrapolated_t_star, None, None, None, None, None])
    return data, (["mu", "t", "y1", "y2", "y3", "alpha_norm", "residual"], rows)


COMMANDS = {
    "coeffs": (cmd_coeffs, True),
    "classify": (cmd_classify, True),
    "spectrum": (cmd_spectrum, False),
    "identities": (cmd_identities, False),
    "reduce": (cmd_reduce, True),
    "curve": (cmd_curve, True),
}


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        handler, needs_chart = COMMANDS[args.command]
        chart = _chart_from_args(args) if needs_chart else None
        data, (header, rows) = handler(args, chart)
        text = dumps(data) + "\n" if args.format == "json" else _csv_text(header, rows)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except ScalarCurvError as exc:
        print(f"scalarcurv: error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.command == "identities" and not data["passed"]:
        return 3
    return 0


def main() -> None:
    sys.exit(run())
