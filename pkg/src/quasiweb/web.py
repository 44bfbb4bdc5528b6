"""The (n+1)-web of a rational quasigroup.

The web is formed by the coordinate hyperplanes x_i = const and the level
hypersurfaces F = alpha, i.e. sum f_i(x_i) + A - alpha (sum x_i + a) = 0.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NoRootsFound
from .funcs import UnivariateFunction, eval_jet_any
from .quasigroup import RationalQuasigroup, evaluate, is_regular, solvability_check
from .reducibility import SamplerConfig, sample_regular, slope_difference, substream

log = logging.getLogger(__name__)

LEVEL_TOL = 1e-9
GRID_CELLS = 64


def normal_vector(q: RationalQuasigroup, point) -> list:
    """Coordinates f_i'(x_i) - alpha of the level-surface normal, alpha = F(point)."""
    alpha = evaluate(q, point)
    return _normal_at(q, point, alpha)


def _normal_at(q, point, alpha) -> list:
    return [eval_jet_any(f, x)[1] - alpha for f, x in zip(q.funcs, point)]


def corollary_check(q: RationalQuasigroup, cfg: SamplerConfig | None = None) -> set[tuple[int, int]]:
    """Index pairs whose normal coordinates agree identically.

    Without ``cfg`` the exact path decides f_i' - f_j' == 0 as a polynomial
    identity. With ``cfg`` the pairs are read off sampled normals instead.
    """
    solvability_check(q)
    pairs = combinations(range(1, q.n + 1), 2)
    if cfg is None:
        return {(i, j) for i, j in pairs if slope_difference(q, i, j).is_zero()}
    X = sample_regular(q, cfg, substream(cfg.seed, 11))
    N = np.array([_normal_at(q, x, evaluate(q, list(x))) for x in X])
    out = set()
    for i, j in pairs:
        diff = np.abs(N[:, i - 1] - N[:, j - 1])
        scale = np.abs(N[:, i - 1]) + np.abs(N[:, j - 1]) + 1e-30
        if np.all(diff <= cfg.tol * scale):
            out.add((i, j))
    return out


# level sets ----------------------------------------------------------------

@dataclass
class WebSlice:
    alpha: float
    points: list = field(default_factory=list)
    normals: list = field(default_factory=list)
    # points of the pencil's base locus: on every level, outside the regular domain
    base_points: list = field(default_factory=list)
    base_normals: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "points": [list(p) for p in self.points],
            "normals": [list(v) for v in self.normals],
            "base_points": [list(p) for p in self.base_points],
            "base_normals": [list(v) for v in self.base_normals],
        }


def _poly_float(f, x: float) -> float:
    return eval_jet_any(f, x)[0]


def _real_roots_low(coeffs: Sequence[float]) -> list[float]:
    """Real roots of c0 + c1 x + c2 x**2 (degree <= 2)."""
    c0, c1, c2 = (list(coeffs) + [0.0, 0.0, 0.0])[:3]
    if c2 == 0:
        if c1 == 0:
            return []
        return [-c0 / c1]
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    t = -0.5 * (c1 + math.copysign(sq, c1))
    roots = [t / c2]
    if t != 0:
        roots.append(c0 / t)
    elif disc > 0:
        roots.append(-roots[0])
    return roots


def _bracketed_roots(g, dg, lo: float, hi: float) -> list[float]:
    grid = np.linspace(lo, hi, GRID_CELLS + 1)
    vals = [g(x) for x in grid]
    roots = []
    for k in range(GRID_CELLS):
        x0, x1, v0, v1 = grid[k], grid[k + 1], vals[k], vals[k + 1]
        if v0 == 0:
            roots.append(float(x0))
            continue
        if v0 * v1 > 0:
            continue
        while x1 - x0 > 1e-12:
            mid = 0.5 * (x0 + x1)
            vm = g(mid)
            if vm == 0:
                x0 = x1 = mid
                break
            if v0 * vm < 0:
                x1 = mid
            else:
                x0, v0 = mid, vm
        x = 0.5 * (x0 + x1)
        for _ in range(2):
            d = dg(x)
            if d != 0:
                x -= g(x) / d
        roots.append(float(x))
    if vals[-1] == 0:
        roots.append(float(grid[-1]))
    return roots


def _solve_last(q: RationalQuasigroup, alpha: float, prefix: np.ndarray, lo: float, hi: float) -> list[float]:
    """Roots x of f_n(x) - alpha x = alpha (sum prefix + a) - sum f_i(prefix) - A."""
    rhs = alpha * (float(prefix.sum()) + float(q.a)) - float(q.A)
    rhs -= sum(_poly_float(f, x) for f, x in zip(q.funcs[:-1], prefix))
    last = q.funcs[-1]
    if isinstance(last, UnivariateFunction) and last.degree <= 2:
        c = list(last.float_coeffs()) + [0.0] * 3
        c[0] -= rhs
        c[1] -= alpha
        return _real_roots_low(c[:3])
    g = lambda x: eval_jet_any(last, x)[0] - alpha * x - rhs  # noqa: E731
    dg = lambda x: eval_jet_any(last, x)[1] - alpha  # noqa: E731
    return _bracketed_roots(g, dg, lo, hi)


def level_set_sample(q: RationalQuasigroup, alpha: float, count: int,
                     box: Sequence | None = None, seed: int = 0,
                     max_draws: int | None = None) -> WebSlice:
    """Random points of the level set F = alpha inside the regular domain.

    The first n - 1 coordinates are drawn uniformly from ``box``; the last one
    is solved for. Prefixes without a real, regular root are redrawn.
    """
    alpha = float(alpha)
    cfg = SamplerConfig(count=max(count, 1), box=box)
    lo, hi = cfg.bounds(q.n)
    rng = substream(seed, 13, int(np.float64(alpha).view(np.uint64)))
    max_draws = max_draws or 200 * max(count, 1)
    sl = WebSlice(alpha)
    draws = 0
    while len(sl.points) < count and draws < max_draws:
        draws += 1
        prefix = lo[:-1] + (hi[:-1] - lo[:-1]) * rng.random(q.n - 1)
        for root in _solve_last(q, alpha, prefix, lo[-1], hi[-1]):
            x = [float(v) for v in prefix] + [root]
            if not math.isfinite(root) or not is_regular(q, x):
                continue
            if abs(evaluate(q, x) - alpha) > LEVEL_TOL:
                continue
            sl.points.append(tuple(x))
            sl.normals.append(tuple(_normal_at(q, x, alpha)))
            if len(sl.points) >= count:
                break
    if len(sl.points) < count:
        raise NoRootsFound(f"level {alpha!r}: found {len(sl.points)} of {count} points after {draws} draws")
    return sl


def base_points(q: RationalQuasigroup) -> list[tuple[float, ...]]:
    """Real points where numerator and denominator of F both vanish (n = 2 only).

    These lie on every level curve. For n > 2 the base locus is a variety of
    positive dimension and is not enumerated.
    """
    if q.n != 2 or not q.is_polynomial:
        return []
    f1, f2 = q.funcs
    # x2 = -a - x1 substituted into f1(x1) + f2(x2) + A
    mirrored = UnivariateFunction(tuple(c * (-1) ** k for k, c in enumerate(f2.coeffs))).shift(q.a)
    h = f1 + mirrored + UnivariateFunction((q.A,))
    if h.is_zero() or h.degree < 1:
        return []
    roots = np.roots([float(c) for c in reversed(h.coeffs)])
    out = []
    for r in sorted(float(z.real) for z in roots if abs(z.imag) < 1e-12):
        x1 = r
        out.append((x1, -float(q.a) - x1))
    return out


def implicit_residual(q: RationalQuasigroup, point, alpha: float) -> float:
    """sum f_i(x_i) + A - alpha (sum x_i + a), defined everywhere."""
    num = sum(_poly_float(f, float(x)) for f, x in zip(q.funcs, point)) + float(q.A)
    return num - alpha * (sum(float(x) for x in point) + float(q.a))


def sphere_constants(n: int) -> tuple[Fraction, Fraction]:
    """Constants (A, a) making every level of sum x_i**2 pass the unit points.

    At e_k the level condition reads 1 + A = alpha (1 + a); holding for every
    alpha forces both sides to vanish.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    sq = UnivariateFunction.monomial(2)
    solutions = set()
    for k in range(n):
        unit = [Fraction(int(i == k)) for i in range(n)]
        # (num + A) - alpha (den + a) == 0 for all alpha: both parts vanish
        num = sum(sq(x) for x in unit)
        den = sum(unit)
        solutions.add((-num, -den))
    (A, a), = solutions
    return A, a


# export --------------------------------------------------------------------

@dataclass
class ExportSummary:
    slices: list
    failed: dict = field(default_factory=dict)
    text: str = ""

    @property
    def counts(self) -> dict:
        return {s.alpha: len(s.points) for s in self.slices}


def build_slices(q: RationalQuasigroup, levels: Sequence[float], count: int = 64,
                 box: Sequence | None = None, seed: int = 0,
                 anchors: Sequence[Sequence[float]] = ()) -> ExportSummary:
    """Sample every level; levels without roots are collected, not raised."""
    solvability_check(q)
    pencil = list(base_points(q)) + [tuple(float(v) for v in p) for p in anchors]
    summary = ExportSummary([])
    for alpha in levels:
        try:
            sl = level_set_sample(q, alpha, count, box, seed)
        except NoRootsFound as exc:
            log.warning("%s", exc)
            summary.failed[float(alpha)] = str(exc)
            continue
        for p in pencil:
            if p in sl.base_points:
                continue
            if abs(implicit_residual(q, p, sl.alpha)) <= LEVEL_TOL:
                sl.base_points.append(p)
                sl.base_normals.append(tuple(_normal_at(q, p, sl.alpha)))
        summary.slices.append(sl)
    if levels and not summary.slices:
        raise NoRootsFound("no level produced any points")
    return summary


def _num(x: float) -> str:
    return repr(float(x))


def render_csv(n: int, slices: Sequence[WebSlice]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(1, n + 1)] + ["alpha"] + [f"N{i}" for i in range(1, n + 1)])
    for sl in slices:
        rows = list(zip(sl.points, sl.normals)) + list(zip(sl.base_points, sl.base_normals))
        for p, nv in rows:
            w.writerow([_num(v) for v in p] + [_num(sl.alpha)] + [_num(v) for v in nv])
    return buf.getvalue()


def render_json(q: RationalQuasigroup, slices: Sequence[WebSlice]) -> str:
    doc = {
        "n": q.n,
        "spec": q.to_json() if q.is_polynomial else None,
        "hyperplane_families": [
            {"index": i, "equation": f"x{i} = const", "normal": [int(k == i) for k in range(1, q.n + 1)]}
            for i in range(1, q.n + 1)
        ],
        "slices": [s.to_json() for s in slices],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def export_web(q: RationalQuasigroup, levels: Sequence[float], fmt: str = "csv",
               destination: str | Path | None = None, count: int = 64,
               box: Sequence | None = None, seed: int = 0,
               anchors: Sequence[Sequence[float]] = ()) -> ExportSummary:
    """Sample each level and write the slices as CSV or JSON.

    With no destination the text is attached to the summary only.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    summary = build_slices(q, levels, count, box, seed, anchors)
    text = render_csv(q.n, summary.slices) if fmt == "csv" else render_json(q, summary.slices)
    summary.text = text
    if destination is not None:
        with open(destination, "w", newline="") as fh:
            fh.write(text)
    return summary


__all__ = [
    "WebSlice",
    "normal_vector",
    "corollary_check",
    "level_set_sample",
    "base_points",
    "implicit_residual",
    "sphere_constants",
    "build_slices",
    "export_web",
    "render_csv",
    "render_json",
]
