"""Sparse multivariate polynomials over the rationals.

Only what the exact zero-polynomial tests need: construction from univariate
pieces, ring operations and an identity-zero check.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from .funcs import UnivariateFunction


class MultiPoly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], Fraction] = {
            m: c if type(c) is Fraction else Fraction(c)
            for m, c in (terms or {}).items() if c
        }

    @classmethod
    def constant(cls, nvars: int, c) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: Fraction(c)})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "MultiPoly":
        """The coordinate ``x_i`` (0-based)."""
        m = [0] * nvars
        m[i] = 1
        return cls(nvars, {tuple(m): Fraction(1)})

    @classmethod
    def from_univariate(cls, nvars: int, i: int, f: UnivariateFunction) -> "MultiPoly":
        terms = {}
        for k, c in enumerate(f.coeffs):
            m = [0] * nvars
            m[i] = k
            terms[tuple(m)] = c
        return cls(nvars, terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        out = defaultdict(Fraction, self.terms)
        for m, c in other.terms.items():
            out[m] += c
        return MultiPoly(self.nvars, out)

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return self + (-other)

    def __mul__(self, other: "MultiPoly") -> "MultiPoly":
        out: dict = defaultdict(Fraction)
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                out[tuple(a + b for a, b in zip(m1, m2))] += c1 * c2
        return MultiPoly(self.nvars, out)

    def __call__(self, point) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            t = c
            for x, k in zip(point, m):
                if k:
                    t *= Fraction(x) ** k
            total += t
        return total

    def variables(self) -> set[int]:
        """0-based indices of the variables that actually occur."""
        return {i for m in self.terms for i, k in enumerate(m) if k}

    def __repr__(self) -> str:
        return f"MultiPoly({self.nvars}, {dict(sorted(self.terms.items()))})"
