from fractions import Fraction

import numpy as np
import pytest

from kuranishi_atlas.errors import DimensionError, EvalError, ExprSyntaxError
from kuranishi_atlas.exterior import RationalMatrix
from kuranishi_atlas.expr import ExprMap, parse, smoothstep


def test_syntax_error_reports_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 + ", 1)
    assert info.value.position == 5
    assert "unexpected end" in info.value.message


def test_variable_outside_dimension():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x3", 2)
    assert info.value.position == 0


@pytest.mark.parametrize("text", ["x1^2 - 1", "x1*x2", "1/2*x1"])
def test_canonical_text_is_reproduced(text):
    assert parse(text, 2).text() == text


def test_exact_evaluation():
    assert ExprMap.parse(["x2"], 2).evaluate((Fraction(3), Fraction(5))) == (5,)
    assert parse("x1^2 - 1", 1).evaluate((Fraction(1),)) == 0
    assert parse("sinpi(x1)", 1).evaluate((Fraction(1, 2),)) == Fraction(1)


def test_division_by_zero():
    with pytest.raises(EvalError):
        parse("1/x1", 1).evaluate((Fraction(0),))


def test_smoothstep():
    assert smoothstep(Fraction(1, 2)) == Fraction(1, 2)
    assert smoothstep(Fraction(-1)) == 0
    assert smoothstep(Fraction(3)) == 1
    assert smoothstep(Fraction(3), order=1) == 0


def test_exact_jacobian():
    f = ExprMap.parse(["x1*x2", "x1 + x2"], 2)
    assert f.jacobian((Fraction(1), Fraction(2))) == RationalMatrix.from_rows([[2, 1], [1, 1]])


def test_jacobian_agrees_with_finite_differences():
    f = ExprMap.parse(["sinpi(x1)*x2", "step(x1)", "x2^3 - x1"], 2)
    points = np.array([[0.25, 0.5], [0.7, -1.0], [0.1, 2.0]])
    assert f.finite_difference_error(points) < 1e-6


def test_compose_substitutes_inner_map():
    outer = ExprMap.parse(["x1 + x2"], 2)
    inner = ExprMap.parse(["x1", "x1^2"], 1)
    assert outer.compose(inner).evaluate((Fraction(3),)) == (12,)
    with pytest.raises(DimensionError):
        inner.compose(inner)


def test_linear_combination():
    f = ExprMap.parse(["x1", "x2"], 2)
    g = f.linear_combination(RationalMatrix.from_rows([[1, 1], [0, 2]]))
    assert g.evaluate((Fraction(1), Fraction(2))) == (3, 4)


def test_axis_affine():
    assert ExprMap.parse(["2*x1 + 1", "x2"], 2).axis_affine() == [(0, 2, 1), (1, 1, 0)]
    assert ExprMap.parse(["x1*x2"], 2).axis_affine() is None
