from fractions import Fraction

import pytest

from kuranishi_atlas.chart import label_of
from kuranishi_atlas.demos import load_atlas
from kuranishi_atlas.errors import ConstantsError
from kuranishi_atlas.expr import ExprMap
from kuranishi_atlas.geometry import Domain
from kuranishi_atlas.perturbation import (
    PerturbationConstants,
    bump,
    build_zones,
    compute_constants,
    construct_adapted,
    eta_formula,
    inverse_projection,
    pushforward,
    quarter_levels,
    second_reduction,
    validate_adapted,
)
from kuranishi_atlas.zeroset_vfc import count_zeros

F = Fraction
RESOLUTION = F(1, 32)


@pytest.fixture
def constants():
    return PerturbationConstants(F(1), F(1, 2), 0.1, 0.1, 2, F(1, 64))


def test_eta_matches_the_closed_form(constants):
    assert abs(float(constants.eta(0) / constants.delta) - (1 - 2 ** -0.25)) < 1e-12
    for level in quarter_levels(2):
        assert abs(float(constants.eta(level)) - float(eta_formula(level, constants.delta))) < 1e-15


def test_eta_decreases_with_the_level(constants):
    values = list(constants.eta_table().values())
    assert all(a > b > 0 for a, b in zip(values, values[1:]))


def test_bump_plateau_and_support():
    b = bump([0], [F(1, 4)], [F(1, 2)])
    assert b.evaluate((F(0),)) == 1
    assert b.evaluate((F(3, 8),)) == F(1, 2)
    assert b.evaluate((F(3, 4),)) == 0


def test_bump_needs_a_larger_outer_radius():
    with pytest.raises(ValueError):
        bump([0], [F(1, 2)], [F(1, 4)])


def test_constants_of_a_single_chart(zero_linear):
    atlas = zero_linear.atlas
    constants = compute_constants(atlas, zero_linear.reductions["V"], zero_linear.reductions["C"],
                                  resolution=RESOLUTION)
    assert constants.delta_V == F(1, 4)
    assert constants.delta == F(1, 8)
    assert constants.sigma > 0


def test_delta_must_stay_below_delta_v(zero_linear):
    with pytest.raises(ConstantsError):
        compute_constants(zero_linear.atlas, zero_linear.reductions["V"], zero_linear.reductions["C"],
                          resolution=RESOLUTION, delta=1)


def test_adapted_perturbation_of_a_single_chart(zero_linear):
    atlas = zero_linear.atlas
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    constants = compute_constants(atlas, reduction, nested, resolution=RESOLUTION)
    nu = construct_adapted(atlas, reduction, nested, constants, seed=3)
    assert nu.seed == 3
    assert nu.sup_norm(atlas, label_of([1]), RESOLUTION) < constants.sigma
    assert validate_adapted(atlas, reduction, nested, constants, nu).passed


def test_inverse_projection_and_pushforward():
    atlas = load_atlas("zero-two-chart").atlas
    one, two, both = label_of([1]), label_of([2]), label_of([1, 2])
    assert inverse_projection(atlas.change(one, both)).evaluate((F(3, 4), F(0))) == (F(3, 4),)
    assert inverse_projection(atlas.change(two, both)).evaluate((F(1), F(1, 4))) == (F(5, 4),)
    mu = pushforward(atlas, one, both, ExprMap.parse(["x1"], 1))
    assert mu.evaluate((F(3, 4), F(0))) == (F(3, 4), 0)


def test_zones_of_a_single_chart(zero_linear):
    atlas = zero_linear.atlas
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    constants = compute_constants(atlas, reduction, nested, resolution=RESOLUTION)
    zones = build_zones(atlas, reduction, nested, constants)
    label = label_of([1])
    assert zones.labels() == [label]
    assert zones.zone(label, 0).same_set(Domain.from_bounds([(F(-5, 8), F(5, 8))]))
    assert zones.zone(label, 0).contains(zones.zone(label, F(1, 2)))


def test_seeds_give_different_perturbations_with_equal_counts(zero_linear):
    atlas = zero_linear.atlas
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    constants = compute_constants(atlas, reduction, nested, resolution=RESOLUTION)
    first = construct_adapted(atlas, reduction, nested, constants, seed=0)
    second = construct_adapted(atlas, reduction, nested, constants, seed=1)
    label = label_of([1])
    assert first.texts()[label] != ["0"]
    assert first.texts() != second.texts()
    assert "tau = (0)" not in first.transcript[1]
    totals = [count_zeros(atlas, reduction, nested, nu, RESOLUTION).total for nu in (first, second)]
    assert totals == [1, 1]


def test_construction_is_reproducible(zero_linear):
    atlas = zero_linear.atlas
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    constants = compute_constants(atlas, reduction, nested, resolution=RESOLUTION)
    runs = [construct_adapted(atlas, reduction, nested, constants, seed=4) for _ in range(2)]
    assert runs[0].transcript == runs[1].transcript
    assert runs[0].texts() == runs[1].texts()


def test_second_reduction_is_a_valid_nested_pair(zero_linear):
    atlas, nested = zero_linear.atlas, zero_linear.reductions["C"]
    outer, inner, constants = second_reduction(atlas, nested, resolution=RESOLUTION)
    assert outer is nested
    assert inner.precompact_in(nested)
    assert 0 < constants.delta < constants.delta_V
    nu = construct_adapted(atlas, outer, inner, constants, seed=0, resolution=RESOLUTION)
    assert validate_adapted(atlas, outer, inner, constants, nu, RESOLUTION).passed
    assert count_zeros(atlas, outer, inner, nu, RESOLUTION).total == 1
