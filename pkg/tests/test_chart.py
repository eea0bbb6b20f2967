from dataclasses import replace
from fractions import Fraction

import pytest

from kuranishi_atlas.chart import (
    check_index_condition,
    check_map_axioms,
    compose_changes,
    identity_change,
    label_of,
    restrict_chart,
    zero_locus,
)
from kuranishi_atlas.errors import CompositionError, FootprintError, ZeroSetError
from kuranishi_atlas.exterior import RationalMatrix
from kuranishi_atlas.expr import ExprMap
from kuranishi_atlas.geometry import Domain
from kuranishi_atlas.reports import FAIL, NO_FAILURE

F = Fraction
ONE, TWO, ONE_TWO, ONE_THREE = label_of([1]), label_of([2]), label_of([1, 2]), label_of([1, 3])


def test_zero_set_is_a_slice(circle_basic):
    zeros = circle_basic.chart(ONE).zero_set()
    assert zeros.contains_point((F(1, 2), F(0)))
    assert not zeros.contains_point((F(1, 2), F(1, 2)))


def test_zero_set_of_quadratic():
    zeros = zero_locus(ExprMap.parse(["x1^2 - 1"], 1), Domain.from_bounds([(F(-2), F(2))]))
    assert zeros.contains_point((F(-1),))
    assert zeros.contains_point((F(1),))
    assert not zeros.contains_point((F(0),))


def test_transcendental_zero_set_is_refused():
    with pytest.raises(ZeroSetError):
        zero_locus(ExprMap.parse(["sinpi(x1)"], 1), Domain.from_bounds([(F(-1, 2), F(1, 2))]))


def test_restrict_chart_precompact(zero_linear):
    chart = zero_linear.atlas.chart(ONE)
    restricted = restrict_chart(chart, chart.footprint, precompact=True)
    assert restricted.domain.same_set(Domain.from_bounds([(F(-1, 2), F(1, 2))]))


def test_restrict_chart_rejects_empty_footprint(zero_linear):
    chart = zero_linear.atlas.chart(ONE)
    with pytest.raises(FootprintError):
        restrict_chart(chart, Domain.empty(1))


def test_apply_outside_domain(circle_basic):
    change = circle_basic.change(ONE, ONE_TWO)
    assert change.apply((F(5, 6), F(1, 4))) == (F(5, 6), F(1, 4))
    with pytest.raises(ValueError):
        change.apply((F(1, 2), F(0)))


def test_map_axioms_hold_for_restrictions(circle_basic):
    change = circle_basic.change(ONE, ONE_TWO)
    report = check_map_axioms(change, circle_basic.chart(ONE), circle_basic.chart(ONE_TWO), F(1, 16))
    assert report.status == NO_FAILURE


def test_map_axioms_catch_wrong_linear_part(circle_basic):
    change = replace(circle_basic.change(ONE, ONE_TWO), linear=RationalMatrix.identity(1).scaled(2))
    report = check_map_axioms(change, circle_basic.chart(ONE), circle_basic.chart(ONE_TWO), F(1, 16))
    assert report.status == FAIL
    assert any(w.label == "section" for w in report.witnesses)


def test_index_condition(circle_basic):
    change = circle_basic.change(ONE, ONE_TWO)
    source, target = circle_basic.chart(ONE), circle_basic.chart(ONE_TWO)
    assert check_index_condition(change, source, target, resolution=F(1, 16)).passed
    broken = replace(change, linear=RationalMatrix.zeros(1, 1))
    assert check_index_condition(broken, source, target, resolution=F(1, 16)).status == FAIL


def test_compose_with_identity(circle_basic):
    first = circle_basic.change(ONE, ONE_TWO)
    composite = compose_changes(first, identity_change(circle_basic.chart(ONE_TWO)))
    assert composite.source == ONE and composite.target == ONE_TWO
    assert composite.apply((F(5, 6), F(1, 4))) == (F(5, 6), F(1, 4))


def test_compose_mismatched_changes(circle_basic):
    with pytest.raises(CompositionError):
        compose_changes(circle_basic.change(ONE, ONE_TWO), circle_basic.change(ONE, ONE_THREE))
