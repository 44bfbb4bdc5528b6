"""The rational family F = (f_1(x_1) + ... + f_n(x_n) + A) / (x_1 + ... + x_n + a).

Variable indices in the public API are 1-based, points are plain sequences.
Evaluation is exact when every coordinate is rational and floating otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .errors import NotAQuasigroup, SingularPoint
from .funcs import (
    OpaqueFunction,
    UnivariateFunction,
    derivative,
    eval_jet_any,
    format_rational,
    jet_arrays,
    parse_rational,
)
from .jets import EPS_SING, Const, GenericMap, Op, Pow, Var
from .mvpoly import MultiPoly


@dataclass(frozen=True)
class RationalQuasigroup:
    n: int
    funcs: tuple
    A: Fraction = Fraction(0)
    a: Fraction = Fraction(0)
    eps_sing: float = field(default=EPS_SING, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"arity must be at least 2, got {self.n}")
        funcs = tuple(self.funcs)
        if len(funcs) != self.n:
            raise ValueError(f"expected {self.n} functions, got {len(funcs)}")
        object.__setattr__(self, "funcs", funcs)
        object.__setattr__(self, "A", Fraction(self.A))
        object.__setattr__(self, "a", Fraction(self.a))

    @classmethod
    def checked(cls, funcs, A=0, a=0) -> "RationalQuasigroup":
        """Construct and reject degenerate (non-solvable) instances."""
        q = cls(len(funcs), tuple(funcs), Fraction(A), Fraction(a))
        solvability_check(q)
        return q

    @property
    def is_polynomial(self) -> bool:
        return all(isinstance(f, UnivariateFunction) for f in self.funcs)

    def __call__(self, point):
        return evaluate(self, point)

    def permuted(self, perm: Sequence[int]) -> "RationalQuasigroup":
        """Relabel variables: new index ``perm[i]`` carries old function ``i``.

        ``perm`` is a 0-based permutation of ``range(n)``.
        """
        funcs = [None] * self.n
        for old, new in enumerate(perm):
            funcs[new] = self.funcs[old]
        return RationalQuasigroup(self.n, tuple(funcs), self.A, self.a, self.eps_sing)

    def to_json(self) -> dict:
        if not self.is_polynomial:
            raise TypeError("only polynomial instances are serialisable")
        return {
            "n": self.n,
            "A": format_rational(self.A),
            "a": format_rational(self.a),
            "f": [f.to_json() for f in self.funcs],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj) -> "RationalQuasigroup":
        if not isinstance(obj, dict):
            raise ValueError("spec: expected a JSON object")
        for key in ("n", "f"):
            if key not in obj:
                raise ValueError(f"spec: missing field {key!r}")
        n = obj["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise ValueError(f"spec.n: expected an integer >= 2, got {n!r}")
        fs = obj["f"]
        if not isinstance(fs, list):
            raise ValueError("spec.f: expected a list")
        if len(fs) != n:
            raise ValueError(f"spec.f: expected {n} entries, got {len(fs)}")
        funcs = tuple(UnivariateFunction.from_json(f, f"spec.f[{k}]") for k, f in enumerate(fs))
        consts = {}
        for key in ("A", "a"):
            try:
                consts[key] = parse_rational(obj.get(key, "0"))
            except ValueError as exc:
                raise ValueError(f"spec.{key}: {exc}") from None
        return cls(n, funcs, consts["A"], consts["a"])

    @classmethod
    def loads(cls, text: str) -> "RationalQuasigroup":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"spec: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_json(obj)


def _is_exact(point) -> bool:
    return all(isinstance(x, (Rational, Fraction)) for x in point)


def _coerce(point, n: int) -> list:
    if len(point) != n:
        raise ValueError(f"point has {len(point)} coordinates, expected {n}")
    if _is_exact(point):
        return [Fraction(x) for x in point]
    return [float(x) for x in point]


def _sums(q: RationalQuasigroup, x: list):
    """Return ``(S, G, jets)`` with S the denominator, G the numerator."""
    exact = isinstance(x[0], Fraction)
    if exact and not q.is_polynomial:
        x = [float(v) for v in x]
        exact = False
    jets = [eval_jet_any(f, v) for f, v in zip(q.funcs, x)]
    s = sum(x) + (q.a if exact else float(q.a))
    g = sum(j[0] for j in jets) + (q.A if exact else float(q.A))
    if abs(s) < q.eps_sing:
        raise SingularPoint(f"x_1 + ... + x_n + a = {float(s):.3g} is within {q.eps_sing:g} of zero")
    return s, g, jets


def is_regular(q: RationalQuasigroup, point) -> bool:
    return abs(float(sum(point)) + float(q.a)) >= q.eps_sing


def evaluate(q: RationalQuasigroup, point):
    s, g, _ = _sums(q, _coerce(point, q.n))
    return g / s


def first_partial(q: RationalQuasigroup, i: int, point):
    """dF/dx_i = (f_i' S - G) / S**2."""
    s, g, jets = _sums(q, _coerce(point, q.n))
    return (jets[i - 1][1] * s - g) / s**2


def mixed_second_partial(q: RationalQuasigroup, i: int, j: int, point):
    """d2F/dx_i dx_j; also handles ``i == j``."""
    s, g, jets = _sums(q, _coerce(point, q.n))
    fi, fj = jets[i - 1][1], jets[j - 1][1]
    if i == j:
        return jets[i - 1][2] / s - 2 * (fi * s - g) / s**3
    return (-(fi + fj) * s + 2 * g) / s**3


def partials_batch(q: RationalQuasigroup, X: np.ndarray, indices: Sequence[int]):
    """Floating S, G and ``{k: f_k'(x_k)}`` for rows of ``X`` (shape m x n)."""
    s = X.sum(axis=1) + float(q.a)
    g = np.full(X.shape[0], float(q.A))
    d1 = {}
    for k, f in enumerate(q.funcs):
        v, d, _ = jet_arrays(f, X[:, k])
        g = g + v
        if k + 1 in indices:
            d1[k + 1] = d
    return s, g, d1


def to_generic_map(q: RationalQuasigroup) -> GenericMap:
    """Encode a polynomial instance as an expression tree."""
    if not q.is_polynomial:
        raise TypeError("only polynomial instances can be encoded")
    num_terms: list = []
    for k, f in enumerate(q.funcs, start=1):
        for p, c in enumerate(f.coeffs):
            if c == 0:
                continue
            if p == 0:
                num_terms.append(Const(c))
            elif p == 1:
                num_terms.append(Op("*", (Const(c), Var(k))))
            else:
                num_terms.append(Op("*", (Const(c), Pow(Var(k), p))))
    num_terms.append(Const(q.A))
    den_terms = [Var(k) for k in range(1, q.n + 1)] + [Const(q.a)]
    num = Op("+", tuple(num_terms)) if len(num_terms) > 1 else num_terms[0]
    return GenericMap(q.n, Op("/", (num, Op("+", tuple(den_terms)))))


def numerator_of_partial(q: RationalQuasigroup, i: int) -> MultiPoly:
    """Exact numerator f_i'(x_i) (sum x + a) - (sum f + A) of dF/dx_i."""
    if not q.is_polynomial:
        raise TypeError("exact expansion requires polynomial functions")
    n = q.n
    s = MultiPoly.constant(n, q.a)
    g = MultiPoly.constant(n, q.A)
    for k, f in enumerate(q.funcs):
        s = s + MultiPoly.variable(n, k)
        g = g + MultiPoly.from_univariate(n, k, f)
    fi = MultiPoly.from_univariate(n, i - 1, derivative(q.funcs[i - 1]))
    return fi * s - g


def solvability_check(q: RationalQuasigroup) -> None:
    """Raise :class:`NotAQuasigroup` if some dF/dx_i is the zero polynomial."""
    bad = [i for i in range(1, q.n + 1) if numerator_of_partial(q, i).is_zero()]
    if bad:
        raise NotAQuasigroup(bad)


def is_solvable(q: RationalQuasigroup) -> bool:
    try:
        solvability_check(q)
    except NotAQuasigroup:
        return False
    return True


def isotopy_normalize(q: RationalQuasigroup) -> RationalQuasigroup:
    """Absorb A and a into the last function: f_n -> f_n(x - a) + A.

    The result takes points whose last coordinate is shifted by ``+a``.
    """
    if q.A == 0 and q.a == 0:
        return q
    last = q.funcs[-1]
    if not isinstance(last, UnivariateFunction):
        raise TypeError("exact shift requires a polynomial last function")
    new_last = last.shift(-q.a) + UnivariateFunction((q.A,))
    return RationalQuasigroup(q.n, q.funcs[:-1] + (new_last,), Fraction(0), Fraction(0), q.eps_sing)


def shift_point(q: RationalQuasigroup, point) -> list:
    """Map a point of ``q`` to the matching point of ``isotopy_normalize(q)``."""
    x = list(point)
    x[-1] = x[-1] + (q.a if isinstance(x[-1], (Rational, Fraction)) else float(q.a))
    return x


# gallery ---------------------------------------------------------------------

def linear_ramp(n: int) -> RationalQuasigroup:
    """F = (x_1 + 2 x_2 + ... + n x_n) / (x_1 + ... + x_n)."""
    return RationalQuasigroup(n, tuple(UnivariateFunction.linear(i) for i in range(1, n + 1)))


def spheres(n: int, A=-1, a=-1) -> RationalQuasigroup:
    """F = (x_1**2 + ... + x_n**2 + A) / (x_1 + ... + x_n + a)."""
    sq = UnivariateFunction.monomial(2)
    return RationalQuasigroup(n, (sq,) * n, Fraction(A), Fraction(a))


__all__ = [
    "RationalQuasigroup",
    "OpaqueFunction",
    "evaluate",
    "first_partial",
    "mixed_second_partial",
    "partials_batch",
    "to_generic_map",
    "numerator_of_partial",
    "solvability_check",
    "is_solvable",
    "isotopy_normalize",
    "shift_point",
    "is_regular",
    "linear_ramp",
    "spheres",
]
