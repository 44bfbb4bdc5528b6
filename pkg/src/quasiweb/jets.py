"""Expression trees for arbitrary maps F(x_1, ..., x_n) and second-order jets.

A :class:`Jet2` carries a value, the first partials in two chosen directions
and their mixed second partial. Propagating jets through the tree in one pass
gives F, F_i, F_j and F_ij at a point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence, Union

from .errors import SingularPoint

EPS_SING = 1e-6


@dataclass(frozen=True)
class Jet2:
    value: object
    d_i: object
    d_j: object
    d_ij: object
    i: int = 0
    j: int = 0

    @classmethod
    def constant(cls, c, i: int, j: int) -> "Jet2":
        zero = c * 0
        return cls(c, zero, zero, zero, i, j)

    @classmethod
    def variable(cls, x, k: int, i: int, j: int) -> "Jet2":
        zero, one = x * 0, x * 0 + 1
        return cls(x, one if k == i else zero, one if k == j else zero, zero, i, j)

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(other, self.i, self.j)

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.value + o.value, self.d_i + o.d_i, self.d_j + o.d_j,
                    self.d_ij + o.d_ij, self.i, self.j)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.d_i, -self.d_j, -self.d_ij, self.i, self.j)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return Jet2(
            self.value * o.value,
            self.d_i * o.value + self.value * o.d_i,
            self.d_j * o.value + self.value * o.d_j,
            self.d_ij * o.value + self.d_i * o.d_j + self.d_j * o.d_i + self.value * o.d_ij,
            self.i,
            self.j,
        )

    __rmul__ = __mul__

    def reciprocal(self, eps: float = EPS_SING) -> "Jet2":
        v = self.value
        if abs(v) < eps:
            raise SingularPoint(f"division by near-zero value {float(v):.3g}")
        r = 1 / v
        r2 = r * r
        return Jet2(
            r,
            -self.d_i * r2,
            -self.d_j * r2,
            -self.d_ij * r2 + 2 * self.d_i * self.d_j * r2 * r,
            self.i,
            self.j,
        )

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k < 0:
            return (self ** (-k)).reciprocal()
        if k == 0:
            return Jet2.constant(self.value * 0 + 1, self.i, self.j)
        v = self.value
        g = v ** k
        g1 = k * v ** (k - 1)
        g2 = k * (k - 1) * v ** (k - 2) if k >= 2 else v * 0
        return Jet2(
            g,
            g1 * self.d_i,
            g1 * self.d_j,
            g2 * self.d_i * self.d_j + g1 * self.d_ij,
            self.i,
            self.j,
        )


# expression tree -----------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Union[Fraction, float]


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Op:
    kind: str  # one of + - * /
    args: tuple


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


Node = Union[Const, Var, Op, Pow]

_OPS = {"+", "-", "*", "/"}


def _variables(node) -> set[int]:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Op):
        return set().union(*(_variables(a) for a in node.args))
    if isinstance(node, Pow):
        return _variables(node.base)
    return set()


def _count_divisions(node) -> int:
    if isinstance(node, Op):
        return (node.kind == "/") + sum(_count_divisions(a) for a in node.args)
    if isinstance(node, Pow):
        return (node.exponent < 0) + _count_divisions(node.base)
    return 0


@dataclass(frozen=True)
class GenericMap:
    """An arbitrary map of ``n`` variables given as an expression tree."""

    n: int
    root: Node

    def __post_init__(self):
        bad = [k for k in _variables(self.root) if not 1 <= k <= self.n]
        if bad:
            raise ValueError(f"variable index out of range 1..{self.n}: {sorted(bad)}")

    @property
    def divisions(self) -> int:
        return _count_divisions(self.root)

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "GenericMap":
        root = parse_prefix(text)
        used = _variables(root)
        if n is None:
            n = max(used, default=1)
        return cls(n, root)

    def __call__(self, point: Sequence, eps: float = EPS_SING):
        return _evaluate(self.root, [_scalar(x) for x in point], eps)

    def to_prefix(self) -> str:
        return to_prefix(self.root)


def _scalar(x):
    if isinstance(x, (Rational, Fraction)):
        return Fraction(x)
    return float(x)


def _evaluate(node, env, eps):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.index - 1]
    if isinstance(node, Pow):
        base = _evaluate(node.base, env, eps)
        if node.exponent < 0:
            bv = base.value if isinstance(base, Jet2) else base
            if abs(bv) < eps:
                raise SingularPoint("negative power of near-zero base")
            if isinstance(base, Jet2):
                return base ** node.exponent
            return 1 / base ** (-node.exponent)
        return base ** node.exponent
    args = [_evaluate(a, env, eps) for a in node.args]
    k = node.kind
    if k == "+":
        acc = args[0]
        for x in args[1:]:
            acc = acc + x
        return acc
    if k == "*":
        acc = args[0]
        for x in args[1:]:
            acc = acc * x
        return acc
    if k == "-":
        if len(args) == 1:
            return -args[0]
        acc = args[0]
        for x in args[1:]:
            acc = acc - x
        return acc
    # division
    num, den = args
    if isinstance(den, Jet2):
        return num * den.reciprocal(eps)
    if abs(den) < eps:
        raise SingularPoint(f"division by near-zero value {float(den):.3g}")
    if isinstance(num, Jet2):
        return num * (1 / den)
    return num / den


def jet_eval(m: GenericMap, point: Sequence, dirs: tuple[int, int], eps: float = EPS_SING) -> Jet2:
    """Value, first partials along ``dirs`` and their mixed partial at ``point``.

    ``dirs`` holds 1-based variable indices; ``i == j`` gives the pure second
    derivative.
    """
    i, j = dirs
    if len(point) != m.n:
        raise ValueError(f"point has {len(point)} coordinates, map has arity {m.n}")
    for d in dirs:
        if not 1 <= d <= m.n:
            raise ValueError(f"direction {d} out of range 1..{m.n}")
    env = [Jet2.variable(_scalar(x), k + 1, i, j) for k, x in enumerate(point)]
    out = _evaluate(m.root, env, eps)
    if not isinstance(out, Jet2):
        out = Jet2.constant(out, i, j)
    return out


# prefix notation -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot tokenize at position {pos}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _atom(tok: str):
    if re.fullmatch(r"x\d+", tok):
        return Var(int(tok[1:]))
    if re.fullmatch(r"[+-]?\d+(/\d+)?", tok):
        return Const(Fraction(tok))
    try:
        return Const(float(tok))
    except ValueError:
        raise ValueError(f"unknown atom {tok!r}") from None


def parse_prefix(text: str) -> Node:
    """Parse e.g. ``"(/ (+ (pow x1 2) x2) (+ x1 x2))"`` into a tree."""
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty expression")
    node, pos = _parse(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after position {pos}: {tokens[pos:]}")
    return node


def _parse(tokens, pos):
    if pos >= len(tokens):
        raise ValueError("unexpected end of expression")
    tok = tokens[pos]
    if tok == ")":
        raise ValueError(f"unexpected ')' at token {pos}")
    if tok != "(":
        return _atom(tok), pos + 1
    if pos + 1 >= len(tokens):
        raise ValueError("unexpected end of expression")
    head = tokens[pos + 1]
    pos += 2
    args = []
    while pos < len(tokens) and tokens[pos] != ")":
        arg, pos = _parse(tokens, pos)
        args.append(arg)
    if pos >= len(tokens):
        raise ValueError("missing ')'")
    pos += 1
    if head == "pow":
        if len(args) != 2 or not isinstance(args[1], Const) or not (
            isinstance(args[1].value, Fraction) and args[1].value.denominator == 1
        ):
            raise ValueError("pow takes a base and an integer exponent")
        return Pow(args[0], int(args[1].value)), pos
    if head not in _OPS:
        raise ValueError(f"unknown operator {head!r}")
    if head == "/" and len(args) != 2:
        raise ValueError("'/' takes exactly two arguments")
    if len(args) < (1 if head == "-" else 2):
        raise ValueError(f"operator {head!r} has too few arguments")
    return Op(head, tuple(args)), pos


def to_prefix(node) -> str:
    if isinstance(node, Const):
        v = node.value
        if isinstance(v, Fraction):
            return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return repr(v)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Pow):
        return f"(pow {to_prefix(node.base)} {node.exponent})"
    return "(" + " ".join([node.kind] + [to_prefix(a) for a in node.args]) + ")"
