from fractions import Fraction

import numpy as np
import pytest

from kuranishi_atlas.demos import load_atlas
from kuranishi_atlas.errors import DimensionError
from kuranishi_atlas.expr import ExprMap
from kuranishi_atlas.geometry import Domain
from kuranishi_atlas.perturbation import Perturbation, compute_constants, second_reduction
from kuranishi_atlas.reduction import AtlasReduction
from kuranishi_atlas.zeroset_vfc import (
    count_zeros,
    derivative_sign_oracle,
    find_zeros,
    independence_test,
    isolate_zeros,
    quotient_zeros,
    reversed_orientation,
    signed_count,
    snap_rational,
    zero_curve,
)

F = Fraction
RESOLUTION = F(1, 32)


def unperturbed(bundle):
    return Perturbation({}, dict(bundle.reductions["V"].domains), 0)


def test_snap_rational():
    assert snap_rational((0.5, F(1, 3))) == (F(1, 2), F(1, 3))


def test_isolate_zeros_of_quadratic():
    section = ExprMap.parse(["x1^2 - 1"], 1)
    zeros = isolate_zeros(section, Domain.from_bounds([(F(-2), F(2))]), RESOLUTION)
    assert zeros.shape == (2, 1)
    assert np.allclose(zeros[:, 0], [-1.0, 1.0])


def test_count_of_a_linear_section(zero_linear):
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    count = count_zeros(zero_linear.atlas, reduction, nested, unperturbed(zero_linear), RESOLUTION)
    assert count.total == 1
    assert count.to_csv().splitlines()[0] == "class,chart,coordinates,sign"


def test_reversed_orientation_flips_the_count(zero_linear):
    atlas = zero_linear.atlas
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    count = count_zeros(atlas, reduction, nested, unperturbed(zero_linear), RESOLUTION, reversed_orientation(atlas))
    assert count.total == -1


def test_count_of_a_quadratic_section():
    bundle = load_atlas("zero-quadratic")
    count = count_zeros(bundle.atlas, bundle.reductions["V"], bundle.reductions["C"], unperturbed(bundle), RESOLUTION)
    assert count.total == 0
    assert sorted(count.signs) == [-1, 1]


def test_counts_do_not_depend_on_the_seed(zero_linear):
    atlas = zero_linear.atlas
    reduction, nested = zero_linear.reductions["V"], zero_linear.reductions["C"]
    constants = compute_constants(atlas, reduction, nested, resolution=RESOLUTION)
    report = independence_test(atlas, reduction, nested, constants, [0, 1], RESOLUTION)
    assert report.details["total"] == "+1"


@pytest.mark.parametrize("name, total", [("zero-linear", "+1"), ("zero-quadratic", "+0"), ("zero-two-chart", "+0")])
def test_counts_do_not_depend_on_the_reduction(name, total):
    bundle = load_atlas(name)
    atlas = bundle.atlas
    reduction, nested = bundle.reductions["V"], bundle.reductions["C"]
    constants = compute_constants(atlas, reduction, nested, resolution=RESOLUTION)
    alternative = second_reduction(atlas, nested, resolution=RESOLUTION)
    report = independence_test(atlas, reduction, nested, constants, [0, 1], RESOLUTION,
                               bundle.orientation or None, alternatives=[alternative])
    assert report.details["total"] == total
    assert {"reduction 0 seed 1", "reduction 1 seed 0", "reduction 1 seed 1"} <= set(report.details)


def test_counts_need_index_zero(circle_basic):
    with pytest.raises(DimensionError):
        count_zeros(circle_basic, AtlasReduction({}), AtlasReduction({}), Perturbation({}, {}, 0), RESOLUTION)


@pytest.mark.parametrize("text, expected", [("x1", 1), ("-x1", -1), ("x1^2 - 1/4", 0), ("x1^3 - x1/4", 1)])
def test_derivative_sign_oracle(text, expected):
    section = ExprMap.parse([text], 1)
    assert derivative_sign_oracle(section, Domain.from_bounds([(F(-3, 4), F(3, 4))]), RESOLUTION) == expected


def test_zero_curve_of_index_one():
    section = ExprMap.parse(["x2"], 2)
    curve = zero_curve(section, Domain.from_bounds([(F(0), F(1)), (F(-1), F(1))]), F(1, 8))
    assert len(curve) > 0
    assert np.all(np.abs(curve[:, 1]) < 1e-8)


def test_zero_curve_needs_index_one():
    with pytest.raises(DimensionError):
        zero_curve(ExprMap.parse(["x1"], 1), Domain.from_bounds([(F(-1), F(1))]))


def test_zeros_classes_and_signs_step_by_step(zero_linear):
    atlas = zero_linear.atlas
    nu = unperturbed(zero_linear)
    zeros = find_zeros(atlas, zero_linear.reductions["V"], nu, RESOLUTION)
    ((label, found),) = zeros.items()
    assert len(found) == 1
    assert abs(found[0].point[0]) < 1e-9
    classes = quotient_zeros(atlas, zeros, RESOLUTION, nu=nu, nested=zero_linear.reductions["C"])
    assert len(classes) == 1
    assert signed_count(atlas, classes).total == 1


def test_count_across_two_charts():
    bundle = load_atlas("zero-two-chart")
    count = count_zeros(bundle.atlas, bundle.reductions["V"], bundle.reductions["C"], unperturbed(bundle), RESOLUTION)
    assert len(count.classes) == 2
    assert sorted(count.signs) == [-1, 1]
    assert count.total == 0
