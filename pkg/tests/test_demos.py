from fractions import Fraction

import numpy as np
import pytest

from kuranishi_atlas.demos import ATLASES, DEMOS, load_atlas, random_additive_atlas, run_demo


@pytest.mark.parametrize("name", list(DEMOS))
def test_demo_matches_known_outcome(name, config):
    outcome = run_demo(name, config)
    assert outcome.ok, outcome.summary()
    assert outcome.to_dict()["ok"] is True


def test_every_demo_names_a_shipped_atlas():
    for demo in DEMOS.values():
        assert demo.atlas in ATLASES


def test_unknown_demo():
    with pytest.raises(ValueError):
        run_demo("sphere", None)


def test_unknown_atlas():
    with pytest.raises(ValueError):
        load_atlas("sphere")


def _hundred_points(domain, rng):
    points = domain.sample(Fraction(1, 64)).points
    if len(points) > 100:
        points = points[rng.choice(len(points), size=100, replace=False)]
    return points


@pytest.mark.parametrize("name", list(ATLASES))
def test_shipped_sections_match_finite_differences(name):
    atlas = load_atlas(name).atlas
    rng = np.random.default_rng(0)
    for label in atlas.labels:
        chart = atlas.chart(label)
        if chart.section.out_dim == 0:
            continue
        assert chart.section.finite_difference_error(_hundred_points(chart.domain, rng)) < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_random_sections_match_finite_differences(seed):
    atlas = random_additive_atlas(seed).atlas
    rng = np.random.default_rng(seed)
    for label in atlas.labels:
        chart = atlas.chart(label)
        assert chart.section.finite_difference_error(_hundred_points(chart.domain, rng)) < 1e-6
