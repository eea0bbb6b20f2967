import os
from fractions import Fraction

import pytest

from kuranishi_atlas.demos import load_atlas
from kuranishi_atlas.errors import StageError
from kuranishi_atlas.pipeline import count_summary, run_checks, run_stages


def test_perturb_and_count(zero_linear, config):
    run = run_stages(zero_linear, ["perturb", "count"], config)
    assert run.count.total == 1
    assert run.bundle.seed == 0
    summary = count_summary(run)
    assert summary["total"] == 1
    assert "delta" in summary["constants"]
    assert run.files == []


def test_reduce_writes_stage_files(tmp_path, zero_linear, config):
    config.out = str(tmp_path)
    run = run_stages(zero_linear, ["reduce"], config)
    assert set(run.bundle.reductions) == {"V", "C"}
    assert os.path.exists(tmp_path / "01-reduce.atlas")
    assert os.path.exists(tmp_path / "transcript.txt")
    assert any(line.startswith("reduction V") for line in run.transcript)


def test_count_needs_reductions(circle_basic, config):
    from kuranishi_atlas.atlas_file import AtlasFile

    with pytest.raises(StageError) as info:
        run_stages(AtlasFile(circle_basic), ["count"], config)
    assert info.value.stage == "count"


def test_unknown_stage(zero_linear, config):
    with pytest.raises(ValueError):
        run_stages(zero_linear, ["reduce", "polish"], config)


def test_run_checks_on_circle(circle_basic, config):
    report = run_checks(circle_basic, config)
    assert report.passed
    assert set(report.details) >= {"covering", "maps", "index"}


def test_independence_covers_a_second_reduction(zero_linear, config):
    config.independence = True
    run = run_stages(zero_linear, ["perturb"], config)
    report = next(r for r in run.reports if r.name == "independence")
    assert report.details["total"] == "+1"
    assert "reduction 1 seed 1" in report.details


def test_runs_are_reproducible(zero_linear, config):
    first = run_stages(zero_linear, ["perturb", "count"], config)
    second = run_stages(load_atlas("zero-linear"), ["perturb", "count"], config)
    assert "\n".join(first.transcript).encode() == "\n".join(second.transcript).encode()


def test_shrink_stage_feeds_the_metric_to_the_constants(circle_additive, config):
    from kuranishi_atlas.atlas_file import AtlasFile

    config.resolution = Fraction(1, 16)
    run = run_stages(AtlasFile(circle_additive), ["shrink"], config)
    assert run.metric is not None
    low, high = run.metric.ratio_bounds
    assert 0 < low <= high
    assert any(line.startswith("metric ratios") for line in run.transcript)


def test_constants_after_shrink_use_the_metric(circle_additive, config):
    from kuranishi_atlas.atlas_file import AtlasFile

    config.resolution = Fraction(1, 16)
    run = run_stages(AtlasFile(circle_additive), ["shrink", "reduce"], config)
    constants = run.ensure_constants("perturb")
    assert run.metric is not None
    assert 0 < constants.delta < constants.delta_V
