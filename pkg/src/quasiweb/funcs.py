"""Exact univariate polynomials with rational coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_DEGREE = 16


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse a decimal integer or ``"p/q"`` string into a Fraction."""
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"not a rational: {text!r}")
    s = text.strip()
    num, sep, den = s.partition("/")
    try:
        if sep:
            return Fraction(int(num), int(den))
        return Fraction(int(num))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {text!r}") from exc


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _trim(coeffs: Iterable) -> tuple[Fraction, ...]:
    out = [Fraction(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class UnivariateFunction:
    """Polynomial ``sum(coeffs[k] * x**k)`` with exact rational coefficients.

    Coefficients are stored in ascending degree with trailing zeros removed, so
    the zero polynomial has an empty tuple.
    """

    coeffs: tuple[Fraction, ...] = ()
    max_degree: int = MAX_DEGREE

    def __post_init__(self):
        for c in self.coeffs:
            if isinstance(c, float) or not isinstance(c, (Rational, Fraction)):
                raise TypeError(f"coefficients must be exact rationals, got {c!r}")
        trimmed = _trim(self.coeffs)
        object.__setattr__(self, "coeffs", trimmed)
        if len(trimmed) - 1 > self.max_degree:
            raise ValueError(
                f"degree {len(trimmed) - 1} exceeds maximum {self.max_degree}"
            )

    @classmethod
    def of(cls, *coeffs) -> "UnivariateFunction":
        return cls(tuple(Fraction(c) for c in coeffs))

    @classmethod
    def linear(cls, slope, intercept=0) -> "UnivariateFunction":
        return cls((Fraction(intercept), Fraction(slope)))

    @classmethod
    def monomial(cls, power: int, coeff=1) -> "UnivariateFunction":
        return cls((Fraction(0),) * power + (Fraction(coeff),))

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "UnivariateFunction") -> "UnivariateFunction":
        m = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (m - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (m - len(other.coeffs))
        return UnivariateFunction(tuple(x + y for x, y in zip(a, b)), self.max_degree)

    def __neg__(self) -> "UnivariateFunction":
        return UnivariateFunction(tuple(-c for c in self.coeffs), self.max_degree)

    def __sub__(self, other: "UnivariateFunction") -> "UnivariateFunction":
        return self + (-other)

    def __mul__(self, other: "UnivariateFunction") -> "UnivariateFunction":
        if self.is_zero() or other.is_zero():
            return UnivariateFunction((), self.max_degree)
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return UnivariateFunction(tuple(out), max(self.max_degree, len(out) - 1))

    def __call__(self, x):
        acc = 0 if isinstance(x, (Rational, Fraction)) else 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + (c if isinstance(x, (Rational, Fraction)) else float(c))
        if isinstance(x, (Rational, Fraction)):
            return Fraction(acc)
        return acc

    def shift(self, delta) -> "UnivariateFunction":
        """Return the polynomial ``x -> self(x + delta)``, computed exactly."""
        delta = Fraction(delta)
        step = UnivariateFunction((delta, Fraction(1)), self.max_degree)
        acc = UnivariateFunction((), self.max_degree)
        for c in reversed(self.coeffs):
            acc = acc * step + UnivariateFunction((c,), self.max_degree)
        return acc

    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def eval_array(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(x, dtype=float)
        for c in reversed(self.coeffs):
            acc = acc * x + float(c)
        return acc

    def to_json(self) -> dict:
        return {"poly": [format_rational(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj, where: str = "f") -> "UnivariateFunction":
        if not isinstance(obj, dict) or "poly" not in obj:
            raise ValueError(f"{where}: expected an object with a 'poly' list")
        raw = obj["poly"]
        if not isinstance(raw, list):
            raise ValueError(f"{where}.poly: expected a list of rationals")
        coeffs = []
        for k, c in enumerate(raw):
            try:
                coeffs.append(parse_rational(c))
            except ValueError as exc:
                raise ValueError(f"{where}.poly[{k}]: {exc}") from None
        return cls(tuple(coeffs))

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            cs = format_rational(c)
            terms.append(cs if k == 0 else f"{cs}*x^{k}" if k > 1 else f"{cs}*x")
        return " + ".join(terms)


def derivative(f: UnivariateFunction) -> UnivariateFunction:
    return UnivariateFunction(
        tuple(k * c for k, c in enumerate(f.coeffs) if k > 0), f.max_degree
    )


def eval_jet(f: UnivariateFunction, x):
    """Return ``(f(x), f'(x), f''(x))`` in one Horner pass.

    Exact when ``x`` is rational, floating otherwise.
    """
    exact = isinstance(x, (Rational, Fraction))
    if exact:
        x = Fraction(x)
        v = d1 = d2 = Fraction(0)
    else:
        x = float(x)
        v = d1 = d2 = 0.0
    for c in reversed(f.coeffs):
        d2 = d2 * x + 2 * d1
        d1 = d1 * x + v
        v = v * x + (c if exact else float(c))
    return v, d1, d2


def linear_slope(f: UnivariateFunction) -> tuple[Fraction, Fraction] | None:
    """``(c, d)`` with ``f = c*x + d`` when ``f`` has degree at most one."""
    if f.degree > 1:
        return None
    c = f.coeffs[1] if f.degree == 1 else Fraction(0)
    d = f.coeffs[0] if f.degree >= 0 else Fraction(0)
    return c, d


@dataclass(frozen=True)
class OpaqueFunction:
    """Black-box univariate function given by value/derivative callables.

    Accepted by floating evaluation paths only; the exact classifier rejects it.
    """

    value: Callable[[float], float]
    first: Callable[[float], float]
    second: Callable[[float], float]
    name: str = "opaque"

    def __call__(self, x):
        return self.value(float(x))

    def eval_array(self, x: np.ndarray) -> np.ndarray:
        return np.vectorize(self.value, otypes=[float])(x)


def eval_jet_any(f, x):
    """Floating jet for either a polynomial or an opaque function."""
    if isinstance(f, OpaqueFunction):
        x = float(x)
        return f.value(x), f.first(x), f.second(x)
    return eval_jet(f, x)


def jet_arrays(f, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised floating ``(f, f', f'')`` over an array of abscissae."""
    if isinstance(f, OpaqueFunction):
        vec = lambda g: np.vectorize(g, otypes=[float])(x)  # noqa: E731
        return vec(f.value), vec(f.first), vec(f.second)
    v = np.zeros_like(x, dtype=float)
    d1 = np.zeros_like(v)
    d2 = np.zeros_like(v)
    for c in reversed(f.coeffs):
        d2 = d2 * x + 2 * d1
        d1 = d1 * x + v
        v = v * x + float(c)
    return v, d1, d2


def poly(coeffs: Sequence) -> UnivariateFunction:
    """Shorthand constructor accepting ints, Fractions or rational strings."""
    return UnivariateFunction(tuple(parse_rational(c) for c in coeffs))
