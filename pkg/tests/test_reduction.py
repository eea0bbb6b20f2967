from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kuranishi_atlas.chart import label_of
from kuranishi_atlas.errors import CoverError, ReductionError
from kuranishi_atlas.geometry import Domain
from kuranishi_atlas.reduction import (
    AtlasReduction,
    atlas_reduce,
    cover_reduce,
    lebesgue_number,
    nest_reduction,
    renest,
    validate_reduction,
)

F = Fraction
CIRCLE = Domain.from_bounds([None], [True])


def arc(lo, hi):
    return Domain.from_bounds([(F(lo), F(hi))], [True])


def test_cover_reduction_of_three_arcs():
    cover = {1: arc(F(1, 3), 1), 2: arc(F(2, 3), F(4, 3)), 3: arc(1, F(5, 3))}
    reduction = cover_reduce(CIRCLE, cover, resolution=F(1, 32))
    assert reduction.verify().passed
    labels = reduction.nonempty()
    assert label_of([1]) in labels
    assert label_of([1, 2]) in labels
    assert label_of([1, 2, 3]) not in labels


def test_cover_reduction_needs_a_cover():
    with pytest.raises(CoverError):
        cover_reduce(CIRCLE, {1: arc(0, F(1, 2))})


def test_lebesgue_number_of_a_trivial_cover():
    assert lebesgue_number(CIRCLE, {1: CIRCLE}) == 1


@settings(max_examples=10, deadline=None)
@given(st.sets(st.integers(0, 15), min_size=2, max_size=4))
def test_cover_reduction_of_grid_arcs(cuts):
    points = sorted(F(c, 16) for c in cuts)
    gaps = [b - a for a, b in zip(points, points[1:] + [points[0] + 1])]
    if min(gaps) < F(1, 8):
        return
    margin = F(1, 16)
    cover = {k + 1: arc(points[k] - margin, points[k] + gaps[k] + margin) for k in range(len(points))}
    reduction = cover_reduce(CIRCLE, cover, resolution=F(1, 32))
    assert reduction.verify().passed


def test_reduction_of_a_single_chart(zero_linear):
    atlas = zero_linear.atlas
    reduction = atlas_reduce(atlas, resolution=F(1, 32))
    assert reduction.domains[label_of([1])].same_set(Domain.from_bounds([(F(-1, 2), F(1, 2))]))
    assert validate_reduction(atlas, reduction, F(1, 32)).passed
    nested = nest_reduction(atlas, reduction, F(1, 32))
    assert nested.precompact_in(reduction)
    assert validate_reduction(atlas, nested, F(1, 32)).passed


def test_reduction_needs_a_tame_atlas(circle_basic):
    with pytest.raises(ReductionError):
        atlas_reduce(circle_basic, resolution=F(1, 16))


def test_nesting_needs_footprint_regions(zero_linear):
    with pytest.raises(ReductionError):
        nest_reduction(zero_linear.atlas, AtlasReduction(dict(zero_linear.reductions["V"].domains)))


def test_reduction_that_misses_the_zero_set(zero_linear):
    atlas = zero_linear.atlas
    broken = AtlasReduction({label_of([1]): Domain.from_bounds([(F(1, 4), F(1, 2))])})
    assert not validate_reduction(atlas, broken, F(1, 32)).passed


def test_renest_keeps_the_zeros_inside(zero_linear):
    atlas, nested = zero_linear.atlas, zero_linear.reductions["C"]
    inner = renest(atlas, nested)
    label = label_of([1])
    assert inner.precompact_in(nested)
    assert inner.parent is nested
    assert inner.domains[label].contains_point([F(0)])
    assert not inner.domains[label].same_set(nested.domains[label])
    # zeros at 0 in C = (-1/4, 1/4): radius 3/4 of the clearance 1/4
    assert inner.domains[label].same_set(Domain.from_bounds([(F(-3, 16), F(3, 16))]))


def test_renest_drops_charts_without_zeros(zero_linear):
    atlas = zero_linear.atlas
    label = label_of([1])
    away = AtlasReduction({label: Domain.from_bounds([(F(1, 8), F(1, 4))])})
    assert renest(atlas, away).nonempty() == []


@settings(max_examples=100, deadline=None)
@given(st.sets(st.integers(0, 5), min_size=2, max_size=6), st.integers(0, 31), st.sampled_from([F(1, 32), F(1, 16)]))
def test_cover_reduction_of_up_to_six_arcs(slots, offset, margin):
    points = sorted(F(5 * s + offset, 32) for s in slots)
    gaps = [b - a for a, b in zip(points, points[1:] + [points[0] + 1])]
    cover = {k + 1: arc(points[k] - margin, points[k] + gaps[k] + margin) for k in range(len(points))}
    reduction = cover_reduce(CIRCLE, cover, resolution=F(1, 32))
    assert reduction.verify().passed
