from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasiweb.funcs import (
    UnivariateFunction,
    derivative,
    eval_jet,
    linear_slope,
    parse_rational,
    poly,
)
from quasiweb.mvpoly import MultiPoly

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=12)
polys = st.lists(rationals, max_size=8).map(lambda cs: UnivariateFunction(tuple(cs)))


def test_derivative_examples():
    assert derivative(poly([0, 0, 1])) == poly([0, 2])
    assert derivative(poly([5])).is_zero()
    assert derivative(poly([0, 1, 0, 2])) == poly([1, 0, 6])


def test_eval_jet_examples():
    assert eval_jet(poly([0, 0, 0, 1]), 2) == (8, 12, 12)
    assert eval_jet(UnivariateFunction(), Fraction(7, 3)) == (0, 0, 0)
    assert eval_jet(poly([0, 0, 1]), 1) == (1, 2, 2)


def test_eval_jet_exact_types():
    v, d1, d2 = eval_jet(poly([1, "1/2", 3]), Fraction(1, 3))
    assert all(isinstance(t, Fraction) for t in (v, d1, d2))
    assert v == 1 + Fraction(1, 6) + Fraction(1, 3)


def test_linear_slope_examples():
    assert linear_slope(poly([0, 3])) == (3, 0)
    assert linear_slope(poly([5, 2])) == (2, 5)
    assert linear_slope(poly([0, 0, 1])) is None
    assert linear_slope(UnivariateFunction()) == (0, 0)


def test_trailing_zeros_trimmed():
    f = poly([1, 2, 0, 0])
    assert f.coeffs == (1, 2)
    assert f.degree == 1
    assert UnivariateFunction().degree == -1


def test_degree_cap():
    with pytest.raises(ValueError):
        UnivariateFunction.monomial(17)
    UnivariateFunction.monomial(16)


def test_float_coefficients_rejected():
    with pytest.raises(TypeError):
        UnivariateFunction((0.5,))


@pytest.mark.parametrize("text,value", [("3", 3), ("-7", -7), ("2/6", Fraction(1, 3)), (" -1/2 ", Fraction(-1, 2))])
def test_parse_rational(text, value):
    assert parse_rational(text) == value


@pytest.mark.parametrize("text", ["1.5", "x", "1/0", "", None, True])
def test_parse_rational_rejects(text):
    with pytest.raises(ValueError):
        parse_rational(text)


def test_json_round_trip():
    f = poly(["1/2", 0, -3])
    assert f.to_json() == {"poly": ["1/2", "0", "-3"]}
    assert UnivariateFunction.from_json(f.to_json()) == f


def test_from_json_names_position():
    with pytest.raises(ValueError, match=r"f\.poly\[1\]"):
        UnivariateFunction.from_json({"poly": ["1", "oops"]})


@given(polys, polys)
def test_derivative_is_linear(f, g):
    assert derivative(f + g) == derivative(f) + derivative(g)


@given(polys, rationals)
def test_jet_first_matches_derivative_value(f, x):
    assert eval_jet(f, x)[1] == eval_jet(derivative(f), x)[0]
    assert eval_jet(f, x)[2] == eval_jet(derivative(derivative(f)), x)[0]


@given(polys)
def test_linear_slope_iff_constant_derivative(f):
    assert (linear_slope(f) is not None) == (derivative(f).degree <= 0)


@given(polys, rationals, rationals)
def test_shift_is_composition(f, delta, x):
    assert f.shift(delta)(x) == f(x + delta)


@given(polys, polys, rationals)
def test_product_evaluates(f, g, x):
    assert (f * g)(x) == f(x) * g(x)


def test_multipoly_expansion():
    # (x0 + x1)**2 - x0**2 - 2 x0 x1 - x1**2 == 0
    x0, x1 = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
    two = MultiPoly.constant(2, 2)
    assert ((x0 + x1) * (x0 + x1) - x0 * x0 - two * x0 * x1 - x1 * x1).is_zero()
    assert not (x0 * x1).is_zero()
    assert (x0 * x1 + x0)([3, 5]) == 18
