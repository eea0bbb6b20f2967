from fractions import Fraction

import pytest
from pydantic import ValidationError

from kuranishi_atlas import config as config_module
from kuranishi_atlas.config import RunConfig, parse_seeds


def test_parse_seeds():
    assert parse_seeds("0,3,7") == [0, 3, 7]
    assert parse_seeds("3") == [0, 1, 2]
    with pytest.raises(ValueError):
        parse_seeds(" ")


def test_resolution_from_text():
    assert RunConfig(resolution="1/16").resolution == Fraction(1, 16)
    with pytest.raises(ValidationError):
        RunConfig(resolution="-1/16")


@pytest.mark.parametrize("overrides", [
    {"checks": ["maps", "volume"]},
    {"level": "extreme"},
    {"seeds": []},
    {"map_tolerance": 0.0},
])
def test_rejected_settings(overrides):
    with pytest.raises(ValidationError):
        RunConfig(resolution=Fraction(1, 8), **overrides)


def test_from_env_uses_module_settings(monkeypatch):
    monkeypatch.setattr(config_module, "KURANISHI_RESOLUTION", "1/8")
    monkeypatch.setattr(config_module, "SEEDS", "2")
    run_config = RunConfig.from_env(level=None, out="results")
    assert run_config.resolution == Fraction(1, 8)
    assert run_config.seeds == [0, 1]
    assert run_config.level == "standard"
    assert run_config.out == "results"


def test_output_directory_is_off_by_default():
    assert RunConfig(resolution=Fraction(1, 8)).out == ""
    assert RunConfig.from_env().out == config_module.OUTPUT_DIR
