"""Reducibility conditions: generation, sampled residuals and exact classification.

A map F is reducible along a block B of variables inside a scope P when
F_pa * F_b - F_pb * F_a vanishes for all a, b in B and p in P \\ B. For the
rational family the residual factors as

    (f_a' - f_b') * (f_p' * S - G) / S**4,    S = sum x + a,  G = sum f + A,

which gives an exact decision procedure alongside the sampled one.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import InvalidStructure, NotAQuasigroup, NotReducibleBlock, SingularPoint
from .funcs import UnivariateFunction, derivative, eval_jet, format_rational, linear_slope
from .jets import EPS_SING, GenericMap, jet_eval
from .mvpoly import MultiPoly
from .quasigroup import (
    RationalQuasigroup,
    evaluate,
    first_partial,
    mixed_second_partial,
    numerator_of_partial,
    partials_batch,
    solvability_check,
)

log = logging.getLogger(__name__)

TAU = 1e-30
DEFAULT_TOL = 1e-8
DEFAULT_BOX = (3.0, 7.0)

Target = Union[RationalQuasigroup, GenericMap]


# structures ----------------------------------------------------------------

@dataclass(frozen=True)
class Structure:
    """Nested blocks over the indices ``1..n``.

    ``root`` is a tuple whose items are ints (leaves) or nested tuples (blocks).
    """

    root: tuple

    def __post_init__(self):
        leaves = _leaves(self.root)
        n = len(leaves)
        if sorted(leaves) != list(range(1, n + 1)):
            raise InvalidStructure(
                f"indices must be 1..{n} each exactly once, got {sorted(leaves)}"
            )
        _check_blocks(self.root, n)

    @property
    def n(self) -> int:
        return len(_leaves(self.root))

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "Structure":
        """Parse bracket syntax such as ``"[[1,2],3,4]"``."""
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidStructure(f"cannot parse structure at column {exc.colno}: {exc.msg}") from None
        if not isinstance(obj, list):
            raise InvalidStructure("structure must be a bracketed list")
        s = cls(_to_tuple(obj))
        if n is not None and s.n != n:
            raise InvalidStructure(f"structure covers {s.n} indices, target has arity {n}")
        return s

    @classmethod
    def single_block(cls, n: int, block: Sequence[int]) -> "Structure":
        block = tuple(sorted(block))
        rest = tuple(i for i in range(1, n + 1) if i not in block)
        return cls((block,) + rest)

    def blocks(self) -> list[tuple[frozenset, frozenset]]:
        """All ``(block, enclosing scope)`` pairs, outermost first."""
        out: list = []

        def walk(node, scope):
            for child in node:
                if isinstance(child, tuple):
                    out.append((frozenset(_leaves(child)), scope))
                    walk(child, frozenset(_leaves(child)))

        walk(self.root, frozenset(_leaves(self.root)))
        return out

    def __str__(self) -> str:
        def fmt(node):
            return "[" + ",".join(fmt(c) if isinstance(c, tuple) else str(c) for c in node) + "]"

        return fmt(self.root)


def _to_tuple(obj):
    if isinstance(obj, list):
        return tuple(_to_tuple(x) for x in obj)
    if isinstance(obj, int) and not isinstance(obj, bool):
        return obj
    raise InvalidStructure(f"unexpected entry {obj!r} in structure")


def _leaves(node) -> list[int]:
    if isinstance(node, int):
        return [node]
    out = []
    for c in node:
        out.extend(_leaves(c))
    return out


def _check_blocks(node, scope_size):
    for child in node:
        if isinstance(child, tuple):
            size = len(_leaves(child))
            if size < 2 or size > scope_size - 1:
                raise InvalidStructure(
                    f"block {list(_leaves(child))} has size {size}; "
                    f"must be between 2 and {scope_size - 1}"
                )
            _check_blocks(child, size)


class ConditionTriple(NamedTuple):
    a: int
    b: int
    p: int

    @classmethod
    def make(cls, a: int, b: int, p: int) -> "ConditionTriple":
        if len({a, b, p}) != 3:
            raise ValueError(f"indices must be distinct: {(a, b, p)}")
        a, b = min(a, b), max(a, b)
        return cls(a, b, p)


def conditions_for(structure: Structure) -> list[ConditionTriple]:
    """Every (a, b, p) with a < b in a block and p in its scope but outside it."""
    out = set()
    for block, scope in structure.blocks():
        for a, b in combinations(sorted(block), 2):
            for p in sorted(scope - block):
                out.add(ConditionTriple(a, b, p))
    return sorted(out)


# residuals -----------------------------------------------------------------

def _normalize(r, t1, t2):
    return abs(r) / (abs(t1) + abs(t2) + TAU)


def residual(target: Target, t: ConditionTriple, point) -> tuple[float, float]:
    """Return ``(r, rho)``: r = F_pa F_b - F_pb F_a and its normalised size."""
    a, b, p = t
    if isinstance(target, RationalQuasigroup):
        fa, fb = first_partial(target, a, point), first_partial(target, b, point)
        fpa = mixed_second_partial(target, p, a, point)
        fpb = mixed_second_partial(target, p, b, point)
    else:
        ja = jet_eval(target, point, (p, a))
        jb = jet_eval(target, point, (p, b))
        fa, fpa = ja.d_j, ja.d_ij
        fb, fpb = jb.d_j, jb.d_ij
    t1, t2 = fpa * fb, fpb * fa
    r = t1 - t2
    return r, float(_normalize(r, t1, t2))


def residual_batch(q: RationalQuasigroup, t: ConditionTriple, X: np.ndarray):
    """Vectorised floating residual and rho for rows of ``X``."""
    a, b, p = t
    s, g, d1 = partials_batch(q, X, (a, b, p))
    u, v, w = d1[a], d1[b], d1[p]
    fa = (u * s - g) / s**2
    fb = (v * s - g) / s**2
    fpa = (-(u + w) * s + 2 * g) / s**3
    fpb = (-(v + w) * s + 2 * g) / s**3
    t1, t2 = fpa * fb, fpb * fa
    r = t1 - t2
    return r, np.abs(r) / (np.abs(t1) + np.abs(t2) + TAU)


def eq16_residual(q: RationalQuasigroup, t: ConditionTriple, point) -> Fraction:
    """Exact (f_a' - f_b') * (f_p' S - G) at a rational point."""
    if not q.is_polynomial:
        raise TypeError("exact residual requires polynomial functions")
    x = [Fraction(v) for v in point]
    if len(x) != q.n:
        raise ValueError(f"point has {len(x)} coordinates, expected {q.n}")
    s = sum(x) + q.a
    if abs(s) < q.eps_sing:
        raise SingularPoint(f"x_1 + ... + x_n + a = {float(s):.3g} is within {q.eps_sing:g} of zero")
    g = sum(f(v) for f, v in zip(q.funcs, x)) + q.A
    a, b, p = t
    d = lambda k: eval_jet(q.funcs[k - 1], x[k - 1])[1]  # noqa: E731
    return (d(a) - d(b)) * (d(p) * s - g)


def slope_difference(q: RationalQuasigroup, a: int, b: int) -> MultiPoly:
    """The first factor f_a'(x_a) - f_b'(x_b) as an exact polynomial."""
    n = q.n
    return (MultiPoly.from_univariate(n, a - 1, derivative(q.funcs[a - 1]))
            - MultiPoly.from_univariate(n, b - 1, derivative(q.funcs[b - 1])))


def factored_polynomial(q: RationalQuasigroup, t: ConditionTriple) -> MultiPoly:
    return slope_difference(q, t.a, t.b) * numerator_of_partial(q, t.p)


def exact_structure_holds(q: RationalQuasigroup, structure: Structure) -> bool:
    """Decide every condition of ``structure`` as a polynomial identity."""
    return all(factored_polynomial(q, t).is_zero() for t in conditions_for(structure))


# sampling ------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    count: int = 64
    box: tuple | None = None  # per-coordinate (lo, hi); None -> DEFAULT_BOX
    seed: int = 0
    tol: float = DEFAULT_TOL
    max_rounds: int = 100

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def bounds(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        box = self.box
        if box is None:
            box = (DEFAULT_BOX,) * n
        elif len(box) == 2 and not isinstance(box[0], (tuple, list)):
            box = (tuple(box),) * n
        if len(box) != n:
            raise ValueError(f"box has {len(box)} intervals, expected {n}")
        lo = np.array([float(b[0]) for b in box])
        hi = np.array([float(b[1]) for b in box])
        if np.any(lo >= hi):
            raise ValueError("box needs lo < hi on every coordinate")
        return lo, hi


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, key)``; order of use is irrelevant."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def _offset(target: Target) -> float:
    return float(target.a) if isinstance(target, RationalQuasigroup) else 0.0


def sample_regular(target: Target, cfg: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform points from the box, rejecting those near a singular locus."""
    n = target.n
    lo, hi = cfg.bounds(n)
    eps = target.eps_sing if isinstance(target, RationalQuasigroup) else EPS_SING
    kept: list = []
    total = 0
    for _ in range(cfg.max_rounds):
        X = lo + (hi - lo) * rng.random((cfg.count, n))
        if isinstance(target, RationalQuasigroup):
            X = X[np.abs(X.sum(axis=1) + _offset(target)) >= eps]
        else:
            X = np.array([x for x in X if _generic_regular(target, x)]).reshape(-1, n)
        kept.append(X)
        total += len(X)
        if total >= cfg.count:
            return np.concatenate(kept)[: cfg.count]
    raise SingularPoint(
        f"only {total} regular points after {cfg.max_rounds} rounds; box lies on the singular locus"
    )


def _generic_regular(m: GenericMap, x) -> bool:
    try:
        m(list(x))
    except (SingularPoint, ZeroDivisionError):
        return False
    return True


@dataclass
class TripleReport:
    triple: ConditionTriple
    samples: int
    max_rho: float
    mean_rho: float
    holds: bool


@dataclass
class ResidualReport:
    structure: str
    tol: float
    seed: int
    triples: list[TripleReport] = field(default_factory=list)
    exact: bool | None = None  # polynomial identity verdict, when decidable

    @property
    def holds(self) -> bool:
        return all(t.holds for t in self.triples)

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "fails"

    def to_json(self) -> dict:
        out = {
            "structure": self.structure,
            "tol": self.tol,
            "seed": self.seed,
            "verdict": self.verdict,
            "triples": [
                {"a": t.triple.a, "b": t.triple.b, "p": t.triple.p, "samples": t.samples,
                 "max_rho": t.max_rho, "mean_rho": t.mean_rho,
                 "verdict": "holds" if t.holds else "fails"}
                for t in self.triples
            ],
        }
        if self.exact is not None:
            out["exact_verdict"] = "holds" if self.exact else "fails"
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "b", "p", "samples", "max_rho", "mean_rho", "verdict"])
        for t in self.triples:
            w.writerow([t.triple.a, t.triple.b, t.triple.p, t.samples,
                        repr(t.max_rho), repr(t.mean_rho), "holds" if t.holds else "fails"])
        return buf.getvalue()


def check_structure(target: Target, structure: Structure, cfg: SamplerConfig = SamplerConfig(),
                    exact: bool = True) -> ResidualReport:
    """Sample the reducibility conditions of ``structure`` on ``target``.

    Each triple draws its own points from a substream keyed by the triple, so
    the report depends only on the inputs and the seed. For polynomial targets
    the exact verdict is attached too unless ``exact`` is false, in which case
    the caller is responsible for having checked solvability.
    """
    if structure.n != target.n:
        raise InvalidStructure(f"structure covers {structure.n} indices, target has arity {target.n}")
    if exact and isinstance(target, RationalQuasigroup) and target.is_polynomial:
        solvability_check(target)
        exact = exact_structure_holds(target, structure)
    else:
        exact = None
    report = ResidualReport(str(structure), cfg.tol, cfg.seed, exact=exact)
    for t in conditions_for(structure):
        rng = substream(cfg.seed, *t)
        X = sample_regular(target, cfg, rng)
        if isinstance(target, RationalQuasigroup):
            _, rho = residual_batch(target, t, X)
        else:
            rho = np.array([residual(target, t, list(x))[1] for x in X])
        mx = float(rho.max())
        report.triples.append(TripleReport(t, len(X), mx, float(rho.mean()), mx <= cfg.tol))
    return report


def sampled_degenerate(q: RationalQuasigroup, cfg: SamplerConfig = SamplerConfig()) -> bool:
    """Sampled counterpart of the solvability check: is dF/dx_1 ~ 0 everywhere?"""
    X = sample_regular(q, cfg, substream(cfg.seed, 0))
    s, g, d1 = partials_batch(q, X, (1,))
    num = d1[1] * s - g
    scale = np.abs(d1[1] * s) + abs(float(q.A))
    for k, f in enumerate(q.funcs):
        scale = scale + np.abs(f.eval_array(X[:, k]))
    rho = np.abs(num) / (scale + TAU)
    return bool(rho.max() <= cfg.tol)


# exact classification ------------------------------------------------------

@dataclass(frozen=True)
class Block:
    indices: tuple[int, ...]
    slope: Fraction
    intercepts: tuple[Fraction, ...]

    def to_json(self) -> dict:
        return {
            "indices": list(self.indices),
            "slope": format_rational(self.slope),
            "intercepts": [format_rational(d) for d in self.intercepts],
        }


@dataclass(frozen=True)
class Classification:
    verdict: str  # Irreducible | Reducible | CompletelyReducible | NotAQuasigroup
    blocks: tuple[Block, ...] = ()
    offending: tuple[int, ...] = ()

    IRREDUCIBLE = "Irreducible"
    REDUCIBLE = "Reducible"
    COMPLETE = "CompletelyReducible"
    DEGENERATE = "NotAQuasigroup"

    def pairs(self) -> set[tuple[int, int]]:
        return {pr for b in self.blocks for pr in combinations(b.indices, 2)}

    def to_json(self) -> dict:
        out: dict = {"verdict": self.verdict, "blocks": [b.to_json() for b in self.blocks]}
        if self.offending:
            out["offending"] = list(self.offending)
        return out


def classify(q: RationalQuasigroup) -> Classification:
    """Exact verdict: indices sharing a linear slope form reducible blocks."""
    if not q.is_polynomial:
        raise TypeError("exact classification requires polynomial functions")
    try:
        solvability_check(q)
    except NotAQuasigroup as exc:
        return Classification(Classification.DEGENERATE, offending=exc.indices)
    groups: dict[Fraction, list[tuple[int, Fraction]]] = {}
    for i, f in enumerate(q.funcs, start=1):
        lin = linear_slope(f)
        if lin is not None:
            groups.setdefault(lin[0], []).append((i, lin[1]))
    blocks = sorted(
        (Block(tuple(i for i, _ in g), c, tuple(d for _, d in g))
         for c, g in groups.items() if len(g) >= 2),
        key=lambda b: b.indices[0],
    )
    if not blocks:
        return Classification(Classification.IRREDUCIBLE)
    if len(blocks) == 1 and len(blocks[0].indices) == q.n:
        return Classification(Classification.COMPLETE, tuple(blocks))
    return Classification(Classification.REDUCIBLE, tuple(blocks))


@dataclass(frozen=True)
class ReducedForm:
    """F = g(h, x_rest) with h = sum of the block variables.

    g(h, rest) = (c h + sum_{rest} f_i + D + A) / (h + sum_{rest} x_i + a).
    """

    q: RationalQuasigroup
    block: tuple[int, ...]
    slope: Fraction
    intercept_sum: Fraction

    @property
    def rest(self) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.q.n + 1) if i not in self.block)

    def inner(self, point):
        return sum(point[i - 1] for i in self.block)

    def outer(self, h, rest_values):
        exact = isinstance(h, Fraction) and all(isinstance(v, Fraction) for v in rest_values)
        cv = (lambda z: z) if exact else float  # noqa: E731
        num = cv(self.slope) * h + cv(self.intercept_sum) + cv(self.q.A)
        den = h + cv(self.q.a)
        for i, x in zip(self.rest, rest_values):
            num = num + self.q.funcs[i - 1](x)
            den = den + x
        if abs(den) < self.q.eps_sing:
            raise SingularPoint("reduced form evaluated on the singular locus")
        return num / den

    def __call__(self, point):
        return self.outer(self.inner(point), [point[i - 1] for i in self.rest])

    def describe(self) -> dict:
        return {
            "h": " + ".join(f"x{i}" for i in self.block),
            "g": (
                f"({format_rational(self.slope)}*h"
                + "".join(f" + f{i}(x{i})" for i in self.rest)
                + f" + {format_rational(self.intercept_sum + self.q.A)})"
                + " / (h" + "".join(f" + x{i}" for i in self.rest)
                + f" + {format_rational(self.q.a)})"
            ),
            "block": list(self.block),
            "slope": format_rational(self.slope),
            "intercept_sum": format_rational(self.intercept_sum),
        }


def emit_reduction(q: RationalQuasigroup, block: Sequence[int]) -> ReducedForm:
    block = tuple(sorted(block))
    if len(block) < 2 or len(set(block)) != len(block):
        raise NotReducibleBlock(f"block {list(block)} needs at least two distinct indices")
    cls = classify(q)
    if cls.verdict == Classification.DEGENERATE:
        raise NotReducibleBlock("instance is not a quasigroup")
    for b in cls.blocks:
        if set(block) <= set(b.indices):
            d = sum((dd for i, dd in zip(b.indices, b.intercepts) if i in block), Fraction(0))
            return ReducedForm(q, block, b.slope, d)
    raise NotReducibleBlock(f"indices {list(block)} do not share a linear slope")


# cross-validation ----------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    n_range: tuple[int, int] = (3, 6)
    max_degree: int = 4
    coeff_range: int = 3
    max_denominator: int = 3
    planted_fraction: float = 0.5


def _random_rational(rng: np.random.Generator, cfg: GeneratorConfig, nonzero=False) -> Fraction:
    while True:
        q = Fraction(int(rng.integers(-cfg.coeff_range, cfg.coeff_range + 1)),
                     int(rng.integers(1, cfg.max_denominator + 1)))
        if q != 0 or not nonzero:
            return q


def _random_poly(rng, cfg: GeneratorConfig, min_degree: int = 0) -> UnivariateFunction:
    deg = int(rng.integers(min_degree, cfg.max_degree + 1))
    coeffs = [_random_rational(rng, cfg) for _ in range(deg)]
    coeffs.append(_random_rational(rng, cfg, nonzero=True))
    return UnivariateFunction(tuple(coeffs))


@dataclass(frozen=True)
class Instance:
    q: RationalQuasigroup
    planted: tuple[int, ...] = ()


def random_instance(rng: np.random.Generator, cfg: GeneratorConfig = GeneratorConfig(),
                    planted: bool | None = None) -> Instance:
    """A random polynomial instance, optionally with a planted equal-slope block.

    Planted instances give every function outside the block degree >= 2, so the
    planted block is exactly the block the classifier should find.
    """
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    if planted is None:
        planted = bool(rng.random() < cfg.planted_fraction)
    A = _random_rational(rng, cfg) if rng.random() < 0.5 else Fraction(0)
    a = _random_rational(rng, cfg) if rng.random() < 0.5 else Fraction(0)
    if not planted:
        funcs = tuple(_random_poly(rng, cfg) for _ in range(n))
        return Instance(RationalQuasigroup(n, funcs, A, a))
    k = int(rng.integers(2, n + 1))
    c = _random_rational(rng, cfg)
    lin = [UnivariateFunction.linear(c, _random_rational(rng, cfg)) for _ in range(k)]
    others = [_random_poly(rng, cfg, min_degree=2) for _ in range(n - k)]
    perm = rng.permutation(n)
    funcs = [None] * n
    for old, f in enumerate(lin + others):
        funcs[int(perm[old])] = f
    block = tuple(sorted(int(perm[i]) + 1 for i in range(k)))
    return Instance(RationalQuasigroup(n, tuple(funcs), A, a), block)


@dataclass
class AgreementReport:
    trials: int
    agreed: int = 0
    planted: int = 0
    planted_recovered: int = 0
    verdicts: dict = field(default_factory=dict)
    disagreements: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def agreement(self) -> float:
        return 100.0 if self.trials == 0 else 100.0 * self.agreed / self.trials

    @property
    def ok(self) -> bool:
        return self.agreed == self.trials and self.planted_recovered == self.planted

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "trials": self.trials,
            "agreed": self.agreed,
            "agreement_percent": self.agreement,
            "planted": self.planted,
            "planted_recovered": self.planted_recovered,
            "verdicts": dict(sorted(self.verdicts.items())),
            "disagreements": self.disagreements,
        }
        if timing:
            out["seconds"] = self.seconds
        return out


def compare_instance(q: RationalQuasigroup, cfg: SamplerConfig) -> tuple[Classification, bool, list]:
    """Classify exactly and check every 2-element block by sampling.

    Returns the classification, whether both paths agree, and the pairs the
    sampler found reducible.
    """
    cls = classify(q)
    if cls.verdict == Classification.DEGENERATE:
        return cls, sampled_degenerate(q, cfg), []
    expected = cls.pairs()
    found = []
    for a, b in combinations(range(1, q.n + 1), 2):
        rep = check_structure(q, Structure.single_block(q.n, (a, b)), cfg, exact=False)
        if rep.holds:
            found.append((a, b))
    return cls, set(found) == expected, found


def corpus(trials: int, seed: int = 0, gen: GeneratorConfig = GeneratorConfig()) -> list[Instance]:
    """The seeded instance list used by :func:`cross_validate`.

    With the default half-and-half split, even-numbered trials are planted.
    """
    out = []
    for k in range(trials):
        planted = (k % 2 == 0) if gen.planted_fraction == 0.5 else None
        out.append(random_instance(substream(seed, 7, k), gen, planted))
    return out


def cross_validate(trials: int = 200, seed: int = 0, sampler: SamplerConfig | None = None,
                   gen: GeneratorConfig = GeneratorConfig()) -> AgreementReport:
    """Run the exact classifier and the sampled pair checks over a random corpus.

    Trial ``k`` samples with seed ``seed + k``; disagreeing instances are kept in
    the report as spec JSON.
    """
    sampler = sampler or SamplerConfig(seed=seed)
    report = AgreementReport(trials)
    start = time.perf_counter()
    for k, inst in enumerate(corpus(trials, seed, gen)):
        cls, agree, found = compare_instance(inst.q, SamplerConfig(
            sampler.count, sampler.box, seed + k, sampler.tol, sampler.max_rounds))
        report.verdicts[cls.verdict] = report.verdicts.get(cls.verdict, 0) + 1
        recovered = True
        if inst.planted:
            report.planted += 1
            blocks = [b.indices for b in cls.blocks]
            recovered = inst.planted in blocks or (
                cls.verdict == Classification.DEGENERATE and len(inst.planted) == inst.q.n
            )
            report.planted_recovered += recovered
        if agree and recovered:
            report.agreed += 1
        else:
            report.disagreements.append({
                "trial": k,
                "spec": inst.q.to_json(),
                "classification": cls.to_json(),
                "sampled_pairs": [list(p) for p in found],
                "planted": list(inst.planted),
            })
            log.warning("trial %d: exact and sampled paths disagree", k)
    report.seconds = time.perf_counter() - start
    return report
