from fractions import Fraction

import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kuranishi_atlas.errors import DimensionError
from kuranishi_atlas.geometry import Domain, Interval, SampleCloud

F = Fraction


def arc(lo, hi):
    return Domain.from_bounds([(F(lo), F(hi))], [True])


def test_interval_make_normalizes_circle_arcs():
    assert Interval.make(F(1), F(1, 2)) is None
    assert Interval.make(F(0), F(2), True).full
    assert str(Interval.point(F(1, 3))) == "{1/3}"


def test_arc_intersection():
    meet = arc(0, F(2, 3)).intersection(arc(F(1, 3), 1))
    assert meet.same_set(arc(F(1, 3), F(2, 3)))


def test_wrapping_arc_intersection():
    meet = arc(F(2, 3), F(4, 3)).intersection(arc(0, F(2, 3)))
    assert meet.same_set(arc(0, F(1, 3)))


def test_periodic_distance():
    assert arc(F(1, 3), F(2, 3)).distance([F(0)]) == F(1, 3)


def test_euclidean_distance_to_unit_box():
    box = Domain.from_bounds([(F(0), F(1)), (F(0), F(1))])
    assert box.distance([F(0), F(2)]) == 1


def test_distance_to_empty_domain_is_infinite():
    assert Domain.empty(1).distance([F(0)]) == math.inf


def test_distance_rejects_wrong_dimension():
    with pytest.raises(DimensionError):
        Domain.from_bounds([(F(0), F(1))]).distance([F(0), F(0)])


def test_neighbourhood_of_a_point():
    point = Domain.from_bounds([F(0)])
    assert point.epsilon_neighbourhood(1).same_set(Domain.from_bounds([(F(-1), F(1))]))


def test_neighbourhood_can_cover_the_circle():
    grown = arc(F(1, 3), F(2, 3)).epsilon_neighbourhood(F(1, 3))
    assert grown.same_set(Domain.from_bounds([(F(0), F(1))], [True]))


def test_neighbourhood_rejects_non_positive_radius():
    with pytest.raises(ValueError):
        arc(0, F(1, 2)).epsilon_neighbourhood(0)


def test_difference_removes_closure():
    line = Domain.from_bounds([(F(0), F(1))])
    rest = line.difference(Domain.from_bounds([(F(1, 2), F(2))]))
    assert rest.same_set(Domain.from_bounds([(F(0), F(1, 2))]))
    assert not rest.contains_point([F(1, 2)])


def test_sample_cloud_uses_cell_centers():
    cloud = SampleCloud(Domain.from_bounds([(F(0), F(1))]), F(1, 4))
    assert len(cloud) == 4
    assert sorted(cloud.exact(k)[0] for k in range(len(cloud))) == [F(1, 8), F(3, 8), F(5, 8), F(7, 8)]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 15), st.integers(1, 15), st.sampled_from([F(1, 8), F(1, 16), F(1, 32)]))
def test_sample_cloud_stays_inside_domain(start, length, resolution):
    lo = F(start, 16)
    domain = Domain.from_bounds([(lo, lo + F(length, 16))])
    cloud = SampleCloud(domain, resolution)
    assert len(cloud) > 0
    assert all(domain.contains_points(cloud.points))
    assert np.max(np.diff(np.sort(cloud.points[:, 0])), initial=0) <= float(resolution) + 1e-12


@st.composite
def cylinder_domains(draw, max_boxes=3):
    """Unions of boxes on the cylinder R/Z x R with corners on the 1/8 grid."""
    boxes = []
    for _ in range(draw(st.integers(1, max_boxes))):
        a, b = sorted(draw(st.lists(st.integers(0, 12), min_size=2, max_size=2, unique=True)))
        c, d = sorted(draw(st.lists(st.integers(-8, 8), min_size=2, max_size=2, unique=True)))
        boxes.append(Domain.from_bounds([(F(a, 8), F(b, 8)), (F(c, 8), F(d, 8))], [True, False]))
    return Domain.union_of(boxes)


eighths = st.integers(-8, 16).map(lambda n: F(n, 8))


@settings(max_examples=100, deadline=None)
@given(cylinder_domains(), cylinder_domains(), cylinder_domains())
def test_domain_boolean_laws(first, second, third):
    assert first.union(second).same_set(second.union(first))
    assert first.intersection(second).same_set(second.intersection(first))
    assert first.intersection(second.union(third)).same_set(
        first.intersection(second).union(first.intersection(third)))
    assert first.union(second).intersection(first).same_set(first)
    assert first.contains(first.intersection(second))
    assert first.union(second).contains(second)
    cut = first.difference(second)
    assert first.contains(cut)
    assert cut.intersection(second).is_empty()


@settings(max_examples=100, deadline=None)
@given(cylinder_domains(), st.tuples(eighths, eighths), st.tuples(eighths, eighths))
def test_distance_triangle_inequality(domain, p, q):
    between = Domain.from_bounds(list(q), [True, False]).distance(p)
    assert domain.distance(p) <= between + domain.distance(q) + 1e-12
    assert between <= Domain.from_bounds(list(p), [True, False]).distance(q) + 1e-12
