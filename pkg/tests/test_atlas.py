from fractions import Fraction

import pytest

from kuranishi_atlas.atlas import (
    build_quotient,
    check_covering,
    eps_set,
    equivalent,
    fiber_structure,
    intersection_ranks,
    validate_additivity,
    validate_cocycles,
    validate_index,
    validate_maps,
    validate_tameness,
)
from kuranishi_atlas.chart import label_of
from kuranishi_atlas.demos import random_additive_atlas
from kuranishi_atlas.reports import FAIL, PASS

F = Fraction
RESOLUTION = F(1, 16)


def test_circle_basic_covers(circle_basic):
    report = check_covering(circle_basic)
    assert report.status == PASS
    assert report.details["max_order"] == 2


def test_missing_chart_is_reported(circle_basic):
    charts = {label: chart for label, chart in circle_basic.charts.items() if label != label_of([1, 2])}
    changes = {key: change for key, change in circle_basic.changes.items() if label_of([1, 2]) not in key}
    report = check_covering(circle_basic.with_parts(charts, changes))
    assert report.status == FAIL
    assert any(w.label == "{1,2}" for w in report.witnesses)


def test_circle_basic_is_valid_but_not_additive(circle_basic):
    assert validate_maps(circle_basic, RESOLUTION).passed
    assert validate_index(circle_basic, RESOLUTION).passed
    cocycles = validate_cocycles(circle_basic, "standard", RESOLUTION)
    assert cocycles.passed
    assert cocycles.details["triples"] == 0
    assert validate_additivity(circle_basic).status == FAIL


def test_unknown_cocycle_level(circle_basic):
    with pytest.raises(ValueError):
        validate_cocycles(circle_basic, "extra")


def test_circle_additive_is_tame(circle_additive):
    assert validate_additivity(circle_additive).status == PASS
    ranks = intersection_ranks(circle_additive)
    assert ranks[label_of([1, 2])] == 2
    assert validate_tameness(circle_additive, RESOLUTION).passed


def test_tameness_needs_additivity(circle_basic):
    report = validate_tameness(circle_basic, RESOLUTION)
    assert report.status == FAIL
    assert report.witnesses[0].label == "additivity"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_additive_atlases_are_additive(seed):
    atlas = random_additive_atlas(seed).atlas
    assert check_covering(atlas).passed
    assert validate_additivity(atlas).passed


def test_equivalence_through_an_overlap(circle_basic):
    point = (F(5, 6), F(0))
    assert equivalent(circle_basic, (label_of([1]), point), (label_of([2]), point))
    assert not equivalent(circle_basic, (label_of([1]), point), (label_of([2]), (F(5, 6), F(1, 2))))


def test_quotient_identifies_overlaps(circle_basic):
    quotient = build_quotient(circle_basic, F(1, 8))
    summary = quotient.summary()
    assert summary["morphisms"] > 0
    assert summary["classes"] < summary["objects"]


def test_eps_set_through_the_double_overlap(circle_basic):
    one, two = label_of([1]), label_of([2])
    u_one, u_two = circle_basic.chart(one).domain, circle_basic.chart(two).domain
    assert eps_set(circle_basic, one, u_one, one).same_set(u_one)
    assert eps_set(circle_basic, one, u_one, two).same_set(u_one.intersection(u_two))


def test_fibres_of_identity_changes_are_linear(circle_basic):
    quotient = build_quotient(circle_basic, F(1, 8))
    report = fiber_structure(quotient, label_of([1]), (F(5, 6), F(0)))
    assert report.details["linear"] is True
    assert report.details["fiber_dim"] == 1
    assert not report.witnesses
