"""Curvature perturbations as finite sums of rational terms, with exact derivative jets.

A term ``(c, (e1, e2, e3), d)`` stands for c * x1^e1 x2^e2 x3^e3 * (1 + |x|^2)^(-d).
Partial derivatives of such a term are again finite sums of terms, so every jet
is computed exactly; finite differences are never used.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, SpecError

Key = tuple  # (e1, e2, e3, d)

DEFAULT_MAX_JET_ORDER = 6


def _clean(terms: Mapping[Key, float]) -> dict:
    return {k: float(v) for k, v in sorted(terms.items()) if v != 0.0}


def multi_indices(order: int) -> list[tuple[int, int, int]]:
    """All (a1, a2, a3) with a1 + a2 + a3 == order, in lexicographic order."""
    return [a for a in itertools.product(range(order + 1), repeat=3) if sum(a) == order][::-1]


def _multinomial(alpha) -> int:
    return math.factorial(sum(alpha)) // math.prod(math.factorial(a) for a in alpha)


class CurvatureChart:
    """Immutable curvature perturbation k expressed in one stereographic chart."""

    def __init__(self, terms: Mapping[Key, float] | Iterable, max_jet_order: int = DEFAULT_MAX_JET_ORDER):
        if not isinstance(terms, Mapping):
            merged: dict = {}
            for coeff, exps, d in terms:
                key = (int(exps[0]), int(exps[1]), int(exps[2]), int(d))
                merged[key] = merged.get(key, 0.0) + float(coeff)
            terms = merged
        for (e1, e2, e3, d), c in terms.items():
            if min(e1, e2, e3, d) < 0:
                raise DomainError("exponents and denominator powers must be nonnegative")
            if not math.isfinite(c):
                raise DomainError("term coefficients must be finite")
            if e1 + e2 + e3 > 2 * d:
                raise DomainError(f"term x^{(e1, e2, e3)} (1+|x|^2)^-{d} is unbounded")
        self._terms = _clean(terms)
        self.max_jet_order = int(max_jet_order)
        self._derivs: dict = {(0, 0, 0): self}

    # ------------------------------------------------------------------ basics
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def term_list(self) -> list[tuple[float, tuple[int, int, int], int]]:
        return [(c, (k[0], k[1], k[2]), k[3]) for k, c in self._terms.items()]

    def __eq__(self, other) -> bool:
        return isinstance(other, CurvatureChart) and self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        return f"CurvatureChart({len(self._terms)} terms)"

    def __add__(self, other: "CurvatureChart") -> "CurvatureChart":
        merged = dict(self._terms)
        for k, v in other._terms.items():
            merged[k] = merged.get(k, 0.0) + v
        return CurvatureChart(merged, min(self.max_jet_order, other.max_jet_order))

    def scaled(self, factor: float) -> "CurvatureChart":
        return CurvatureChart({k: factor * v for k, v in self._terms.items()}, self.max_jet_order)

    # ---------------------------------------------------------- differentiation
    def _diff_axis(self, axis: int) -> "CurvatureChart":
        out: dict = {}
        for (e1, e2, e3, d), c in self._terms.items():
            e = [e1, e2, e3]
            if e[axis] > 0:
                ne = list(e)
                ne[axis] -= 1
                key = (ne[0], ne[1], ne[2], d)
                out[key] = out.get(key, 0.0) + c * e[axis]
            if d > 0:
                ne = list(e)
                ne[axis] += 1
                key = (ne[0], ne[1], ne[2], d + 1)
                out[key] = out.get(key, 0.0) - 2.0 * d * c
        return CurvatureChart(out, self.max_jet_order)

    def derivative(self, alpha) -> "CurvatureChart":
        """The chart of the partial derivative d^alpha k (memoised)."""
        alpha = tuple(int(a) for a in alpha)
        root = self
        if alpha in root._derivs:
            return root._derivs[alpha]
        # peel one derivative off the last nonzero axis
        axis = max(i for i in range(3) if alpha[i] > 0)
        parent = list(alpha)
        parent[axis] -= 1
        result = root.derivative(tuple(parent))._diff_axis(axis)
        root._derivs[alpha] = result
        return result

    # --------------------------------------------------------------- evaluation
    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 3:
            raise DomainError("points must have a trailing dimension of 3")
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        q_inv = 1.0 / (1.0 + x1 * x1 + x2 * x2 + x3 * x3)
        cache: dict = {}

        def power(key, base, e):
            # repeated products, so results do not depend on libm's pow
            if (key, e) not in cache:
                cache[(key, e)] = np.ones_like(base) if e == 0 else power(key, base, e - 1) * base
            return cache[(key, e)]

        total = np.zeros(x.shape[:-1])
        for (e1, e2, e3, d), c in self._terms.items():
            total = total + c * (power(0, x1, e1) * power(1, x2, e2) * power(2, x3, e3) * power(3, q_inv, d))
        return float(total) if total.ndim == 0 else total

    def value(self, y) -> float:
        return float(self(np.asarray(y, dtype=float)))

    def ray_series(self, center, directions, n_terms: int) -> np.ndarray:
        """Taylor coefficients g_l(w) of r -> k(center + r w), l = 0..n_terms-1.

        Returned shape is (n_terms, n_directions).  The series converges for
        r < sqrt(1 + |center|^2 - (center.w)^2), which is at least 1.
        """
        y = np.asarray(center, dtype=float)
        w = np.atleast_2d(np.asarray(directions, dtype=float))
        n = n_terms
        m = w.shape[0]
        q0 = 1.0 + float(y @ y)
        beta = 2.0 * (w @ y) / q0
        gamma = 1.0 / q0
        # powers of (1 + beta r + gamma r^2)^(-d) for every d in use
        d_max = max((k[3] for k in self._terms), default=0)
        inv_series = {}
        for d in range(d_max + 1):
            if d == 0:
                s = np.zeros((n, m))
                s[0] = 1.0
                inv_series[0] = s
                continue
            alpha = -float(d)
            f = np.zeros((n, m))
            f[0] = 1.0
            for k in range(1, n):
                acc = ((alpha + 1.0) - k) * beta * f[k - 1]
                if k >= 2:
                    acc = acc + ((alpha + 1.0) * 2.0 - k) * gamma * f[k - 2]
                f[k] = acc / k
            inv_series[d] = f * q0 ** (-d)
        # powers of the linear factors (y_a + w_a r)^e
        e_max = max((max(k[:3]) for k in self._terms), default=0)
        lin = []
        for a in range(3):
            pw = [np.zeros((n, m)) for _ in range(e_max + 1)]
            pw[0][0] = 1.0
            for e in range(1, e_max + 1):
                prev = pw[e - 1]
                cur = y[a] * prev
                cur[1:] += w[:, a] * prev[:-1]
                pw[e] = cur
            lin.append(pw)
        total = np.zeros((n, m))
        for (e1, e2, e3, d), c in self._terms.items():
            poly = _series_mul(_series_mul(lin[0][e1], lin[1][e2]), lin[2][e3])
            total += c * _series_mul(poly, inv_series[d])
        return total

    # -------------------------------------------------------------------- jets
    def jet_at(self, y, order: int) -> "TaylorJet":
        """All partial derivatives of k at ``y`` up to ``order``."""
        if order < 0 or order > self.max_jet_order:
            raise DomainError(f"jet order {order} exceeds max_jet_order {self.max_jet_order}")
        y = np.asarray(y, dtype=float)
        partials = {}
        for o in range(order + 1):
            for alpha in multi_indices(o):
                partials[alpha] = self.derivative(alpha).value(y)
        return TaylorJet(center=tuple(float(v) for v in y), order=order, partials=partials)

    def taylor_remainder(self, jet: "TaylorJet", x) -> np.ndarray | float:
        """k(x) - T^{jet.order}_{k, jet.center}(x)."""
        return self(x) - jet.evaluate(x)

    def gradient_chart(self, axis: int) -> "CurvatureChart":
        alpha = [0, 0, 0]
        alpha[axis] = 1
        return self.derivative(tuple(alpha))

    def estimate_bound(self, order: int = 2, radius: float = 4.0, n: int = 9) -> float:
        """Sampled sup of |d^alpha k| for |alpha| <= order on a cube grid."""
        g = np.linspace(-radius, radius, n)
        pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        best = 0.0
        for o in range(order + 1):
            for alpha in multi_indices(o):
                best = max(best, float(np.max(np.abs(self.derivative(alpha)(pts)))))
        return best

    def rotated(self, rotation) -> "CurvatureChart":
        """The chart of x -> k(R^T x) for an orthogonal matrix R."""
        rot = np.asarray(rotation, dtype=float)
        out: dict = {}
        for (e1, e2, e3, d), c in self._terms.items():
            poly = {(0, 0, 0): c}
            for a, e in enumerate((e1, e2, e3)):
                # (R^T x)_a = sum_b R[b, a] x_b
                lin = {tuple(int(i == b) for i in range(3)): rot[b, a] for b in range(3)}
                for _ in range(e):
                    poly = _poly_mul(poly, lin)
            for ex, v in poly.items():
                key = (ex[0], ex[1], ex[2], d)
                out[key] = out.get(key, 0.0) + v
        return CurvatureChart({k: v for k, v in out.items() if abs(v) > 1e-15}, self.max_jet_order)

    # ----------------------------------------------------------------- JSON io
    def to_json_dict(self) -> dict:
        return {
            "terms": [
                {"coeff": c, "exponents": [e[0], e[1], e[2]], "denom_power": d}
                for c, e, d in self.term_list()
            ]
        }


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    out = np.zeros_like(a)
    for k in range(n):
        nz = a[k]
        if not np.any(nz):
            continue
        out[k:] += nz * b[: n - k]
    return out


def _poly_mul(p: Mapping, q: Mapping) -> dict:
    out: dict = {}
    for e, c in p.items():
        for f, d in q.items():
            if c == 0.0 or d == 0.0:
                continue
            key = (e[0] + f[0], e[1] + f[1], e[2] + f[2])
            out[key] = out.get(key, 0.0) + c * d
    return out


@dataclass(frozen=True)
class TaylorJet:
    """Partial derivatives of k at ``center`` up to ``order``, keyed by multi-index."""

    center: tuple
    order: int
    partials: dict = field(repr=False)

    def partial(self, alpha) -> float:
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.order:
            raise DomainError(f"partial {alpha} exceeds jet order {self.order}")
        return self.partials[alpha]

    @property
    def value(self) -> float:
        return self.partials[(0, 0, 0)]

    def gradient(self) -> np.ndarray:
        return np.array([self.partial(a) for a in ((1, 0, 0), (0, 1, 0), (0, 0, 1))])

    def hessian(self) -> np.ndarray:
        h = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                a = [0, 0, 0]
                a[i] += 1
                a[j] += 1
                h[i, j] = self.partial(a)
        return h

    def tensor(self, ell: int) -> np.ndarray:
        """D^ell k(center) as a full symmetric array of shape (3,)*ell."""
        t = np.empty((3,) * ell)
        for idx in itertools.product(range(3), repeat=ell):
            a = [0, 0, 0]
            for i in idx:
                a[i] += 1
            t[idx] = self.partial(a)
        return t

    def form_poly(self, ell: int) -> dict:
        """D^ell k(center)(x)^ell / ell! as a homogeneous polynomial dictionary."""
        out = {}
        for alpha in multi_indices(ell):
            c = self.partial(alpha) / math.prod(math.factorial(a) for a in alpha)
            if c != 0.0:
                out[alpha] = c
        return out

    def homogeneous_part(self, ell: int, x) -> np.ndarray:
        """D^ell k(center)(x)^ell / ell! evaluated at displacement(s) ``x``."""
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[:-1])
        for alpha, c in self.form_poly(ell).items():
            total = total + c * x[..., 0] ** alpha[0] * x[..., 1] ** alpha[1] * x[..., 2] ** alpha[2]
        return total

    def evaluate(self, x) -> np.ndarray | float:
        """T^order_{k,center}(x)."""
        x = np.asarray(x, dtype=float)
        disp = x - np.asarray(self.center)
        total = np.zeros(x.shape[:-1])
        for ell in range(self.order + 1):
            total = total + self.homogeneous_part(ell, disp)
        return float(total) if total.ndim == 0 else total

    def laplacian_power(self, ell: int) -> float:
        """Delta^ell k(center)."""
        total = 0.0
        for a in multi_indices(ell):
            total += _multinomial(a) * self.partial((2 * a[0], 2 * a[1], 2 * a[2]))
        return total

    def gradient_laplacian_power(self, ell: int) -> np.ndarray:
        """grad Delta^ell k(center)."""
        out = np.zeros(3)
        for i in range(3):
            for a in multi_indices(ell):
                b = [2 * a[0], 2 * a[1], 2 * a[2]]
                b[i] += 1
                out[i] += _multinomial(a) * self.partial(b)
        return out


# ------------------------------------------------------------- example family
@dataclass(frozen=True)
class ExampleFamily:
    """Two-parameter test curvature with a critical point at the origin.

    k = 1 + (3x1^2 - 2x2^2 - x3^2)/(1+|x|^2)^2
          + |x|^4/(1+|x|^2)^3 * (b - a/(1+|x|^2) - (1-a)/(1+|x|^2)^2)
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a <= 3.0):
            raise DomainError(f"example family needs a <= 3, got a={self.a}")
        if not (self.b >= 0.0):
            raise DomainError(f"example family needs b >= 0, got b={self.b}")

    def chart(self) -> CurvatureChart:
        terms: dict = {(0, 0, 0, 0): 1.0, (2, 0, 0, 2): 3.0, (0, 2, 0, 2): -2.0, (0, 0, 2, 2): -1.0}
        quartic = {(4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0, (2, 2, 0): 2.0, (2, 0, 2): 2.0, (0, 2, 2): 2.0}
        for d, c in ((3, self.b), (4, -self.a), (5, -(1.0 - self.a))):
            for e, m in quartic.items():
                key = (e[0], e[1], e[2], d)
                terms[key] = terms.get(key, 0.0) + c * m
        return CurvatureChart(terms)

    # closed forms at the origin
    def a0(self) -> float:
        return -(math.pi ** 2 / 64.0) * (35.0 - 48.0 * self.b + 5.0 * self.a)

    def a1(self) -> float:
        return 120.0 * (self.b - 1.0)

    def a2(self) -> float:
        return 120.0 * (self.b - 1.0) - 56.0

    def a3(self) -> float:
        return 75.0 * (6.0 * self.b + 7.0 * self.a / 8.0 - 63.0 / 8.0)


# --------------------------------------------------------------- JSON parsing
def chart_from_json_dict(data) -> CurvatureChart:
    """Parse either {"terms": [...]} or {"family": "example", "a": .., "b": ..}."""
    if not isinstance(data, dict):
        raise SpecError("chart: expected a JSON object")
    if "family" in data:
        if data["family"] != "example":
            raise SpecError(f"chart.family: unknown family {data['family']!r}")
        for name in ("a", "b"):
            if name not in data:
                raise SpecError(f"chart.{name}: missing example-family parameter")
            if not isinstance(data[name], (int, float)) or isinstance(data[name], bool):
                raise SpecError(f"chart.{name}: expected a number")
        try:
            return ExampleFamily(float(data["a"]), float(data["b"])).chart()
        except DomainError as exc:
            raise SpecError(f"chart.a/b: {exc}") from exc
    if "terms" not in data:
        raise SpecError("chart.terms: missing")
    raw = data["terms"]
    if not isinstance(raw, list) or not raw:
        raise SpecError("chart.terms: expected a non-empty list")
    parsed = []
    for idx, t in enumerate(raw):
        where = f"chart.terms[{idx}]"
        if not isinstance(t, dict):
            raise SpecError(f"{where}: expected an object")
        for name in ("coeff", "exponents", "denom_power"):
            if name not in t:
                raise SpecError(f"{where}.{name}: missing")
        c = t["coeff"]
        if not isinstance(c, (int, float)) or isinstance(c, bool) or not math.isfinite(c):
            raise SpecError(f"{where}.coeff: expected a finite number")
        e = t["exponents"]
        if (
            not isinstance(e, list)
            or len(e) != 3
            or any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in e)
        ):
            raise SpecError(f"{where}.exponents: expected three nonnegative integers")
        d = t["denom_power"]
        if not isinstance(d, int) or isinstance(d, bool) or d < 0:
            raise SpecError(f"{where}.denom_power: expected a nonnegative integer")
        if sum(e) > 2 * d:
            raise SpecError(f"{where}: unbounded term (sum of exponents exceeds 2*denom_power)")
        parsed.append((float(c), tuple(e), d))
    order = data.get("max_jet_order", DEFAULT_MAX_JET_ORDER)
    if not isinstance(order, int) or order < 5:
        raise SpecError("chart.max_jet_order: expected an integer >= 5")
    return CurvatureChart(parsed, max_jet_order=order)


def load_chart(source: str) -> CurvatureChart:
    """Inline JSON text or a path to a JSON file."""
    text = source.strip()
    if not text.startswith("{"):
        path = Path(source)
        if not path.is_file():
            raise SpecError(f"chart: {source!r} is neither inline JSON nor a readable file")
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"chart: invalid JSON ({exc.msg})") from exc
    return chart_from_json_dict(data)
