from fractions import Fraction

import pytest

from kuranishi_atlas.atlas import (
    build_quotient,
    diagnose_hausdorff,
    diagnose_injectivity,
    fiber_structure,
    validate_cocycles,
    validate_tameness,
)
from kuranishi_atlas.chart import label_of
from kuranishi_atlas.demos import random_additive_atlas
from kuranishi_atlas.errors import LemmaHypothesisError, MetricError, ShrinkError, TamingError
from kuranishi_atlas.geometry import Domain
from kuranishi_atlas.shrink import (
    Shrinking,
    lemma_function,
    open_sets_lemma,
    preshrunk,
    sampled_metric,
    shrink,
    shrink_footprints,
    tame_shrink,
)

F = Fraction
RESOLUTION = F(1, 16)


def test_tame_shrink_of_a_tame_atlas(circle_additive):
    levels = []
    tamed = tame_shrink(circle_additive, resolution=RESOLUTION, transcript=levels)
    assert validate_tameness(tamed, RESOLUTION).passed
    assert [state.level for state in levels] == [0, 1, 2]
    for label in circle_additive.labels:
        assert circle_additive.chart(label).domain.contains(tamed.chart(label).domain)


@pytest.mark.parametrize("seed", [0, 1])
def test_tame_shrink_of_weak_atlases(seed):
    atlas = random_additive_atlas(seed).atlas
    tamed = tame_shrink(atlas, resolution=RESOLUTION)
    assert validate_tameness(tamed, RESOLUTION).passed


@pytest.mark.parametrize("seed", range(6))
def test_tamed_atlases_have_a_well_behaved_realization(seed):
    tamed = tame_shrink(random_additive_atlas(seed).atlas, resolution=RESOLUTION)
    assert validate_tameness(tamed, RESOLUTION).passed
    assert validate_cocycles(tamed, "strong", RESOLUTION).passed
    quotient = build_quotient(tamed, RESOLUTION)
    assert diagnose_injectivity(quotient).passed
    assert diagnose_hausdorff(quotient).passed
    for label in tamed.labels:
        cloud = quotient.clouds[label]
        for local in range(0, len(cloud), max(1, len(cloud) // 4)):
            assert fiber_structure(quotient, label, quotient.point(label, local)).details["linear"]


def test_tame_shrink_needs_additivity(circle_basic):
    with pytest.raises(TamingError):
        tame_shrink(circle_basic, resolution=RESOLUTION)


def test_shrink_rejects_larger_domains(circle_additive):
    label = label_of([1])
    bigger = Domain.from_bounds([None, (F(-2), F(2))], [True, False])
    with pytest.raises(ShrinkError):
        shrink(circle_additive, {label: bigger})


def test_metric_needs_a_tame_atlas(circle_basic):
    with pytest.raises(MetricError):
        sampled_metric(circle_basic, resolution=RESOLUTION)


def test_metric_on_a_tame_atlas(circle_additive):
    metric = sampled_metric(circle_additive, resolution=F(1, 8))
    low, high = metric.ratio_bounds
    assert 0 < low <= high


def test_shrink_footprints_keeps_a_cover(circle_additive):
    shrunk = shrink_footprints(circle_additive, F(1, 24))
    for label in circle_additive.basic:
        before, after = circle_additive.chart(label).footprint, shrunk.chart(label).footprint
        assert before.contains(after)
        assert not after.same_set(before)


def test_shrink_footprints_too_far(circle_additive):
    with pytest.raises(ShrinkError):
        shrink_footprints(circle_additive, F(1, 2))


def open_sets_setup():
    outer = Domain.from_bounds([(-1, 1), (-1, 1)])
    zeros = Domain.from_bounds([(-1, 1), 0])
    parts = {1: Domain.from_bounds([(-1, F(1, 4)), 0]), 2: Domain.from_bounds([(F(-1, 4), 1), 0])}
    targets = {
        label_of([1]): Domain.from_bounds([(-1, F(1, 4)), (-1, 1)]),
        label_of([2]): Domain.from_bounds([(F(-1, 4), 1), (-1, 1)]),
        label_of([1, 2]): Domain.from_bounds([(F(-1, 4), F(1, 4)), (-1, 1)]),
    }
    return outer, zeros, parts, targets


def test_open_sets_lemma():
    outer, zeros, parts, targets = open_sets_setup()
    family = open_sets_lemma(outer, zeros, parts, targets)
    both = label_of([1, 2])
    assert targets[both].contains(family[both])
    assert family[both].intersection(zeros).same_set(Domain.from_bounds([(F(-1, 4), F(1, 4)), 0]))
    assert family[label_of([1])].intersection(family[label_of([2])]).same_set(family[both])


def test_open_sets_lemma_needs_matching_zero_sets():
    outer, zeros, parts, targets = open_sets_setup()
    targets[label_of([1])] = outer
    with pytest.raises(LemmaHypothesisError):
        open_sets_lemma(outer, zeros, parts, targets)


def two_set_interval():
    outer = Domain.from_bounds([(-1, 2), (-1, 1)])
    zeros = Domain.from_bounds([(-1, 2), 0])
    parts = {1: Domain.from_bounds([(-1, F(2, 3)), 0]), 2: Domain.from_bounds([(F(1, 3), 2), 0])}
    targets = {
        label_of([1]): Domain.from_bounds([(-1, F(2, 3)), (-1, 1)]),
        label_of([2]): Domain.from_bounds([(F(1, 3), 2), (-1, 1)]),
        label_of([1, 2]): Domain.from_bounds([(F(1, 3), F(2, 3)), (F(-1, 2), F(1, 2))]),
    }
    return outer, zeros, parts, targets


@pytest.mark.parametrize("index, t, expected", [
    (1, F(0), F(2, 3)), (1, F(1, 2), F(1, 6)), (1, F(3, 4), F(0)),
    (2, F(0), F(0)), (2, F(1, 2), F(1, 6)), (2, F(3, 2), F(7, 6)),
])
def test_lemma_function_on_two_intervals(index, t, expected):
    outer, zeros, parts, targets = two_set_interval()
    assert lemma_function(index, outer, zeros, parts, targets, (t, F(0))) == expected


def test_open_sets_lemma_on_two_intervals():
    outer, zeros, parts, targets = two_set_interval()
    family = open_sets_lemma(outer, zeros, parts, targets, RESOLUTION)
    one, two, both = label_of([1]), label_of([2]), label_of([1, 2])
    assert family[one].intersection(family[two]).same_set(family[both])
    for key in (one, two, both):
        assert targets[key].contains(family[key])
        expected = parts[1] if key == one else parts[2] if key == two else parts[1].intersection(parts[2])
        assert family[key].intersection(zeros).same_set(expected)
    # grid values of f_1 widen U_1 away from the end of Z_1
    assert family[one].contains_point((F(-1, 2), F(1, 2)))
    assert not family[one].contains_point((F(3, 5), F(1, 2)))


def test_preshrunk_is_a_precompact_shrinking(circle_additive):
    shrinking = preshrunk(circle_additive, resolution=RESOLUTION)
    assert isinstance(shrinking, Shrinking)
    assert shrinking.is_precompact()
    assert validate_tameness(shrinking.atlas, RESOLUTION).passed
    for (source, target) in shrinking.atlas.changes:
        assert shrinking.domains[source].contains(shrinking.overlap(source, target))


def test_metric_on_a_preshrunk_shrinking(circle_additive):
    shrinking = preshrunk(circle_additive, resolution=RESOLUTION)
    metric = sampled_metric(shrinking.original, shrinking, RESOLUTION)
    low, high = metric.ratio_bounds
    assert 0 < low <= high
    assert metric.isometry_defect <= 2 * float(RESOLUTION)


def test_metric_refuses_a_shrinking_of_another_atlas(circle_additive):
    tamed = tame_shrink(circle_additive, resolution=RESOLUTION)
    with pytest.raises(MetricError):
        sampled_metric(tamed, Shrinking(circle_additive, circle_additive), RESOLUTION)
