import pytest

from src.core.config import ConfigError, RunConfig


def test_defaults_are_valid():
    config = RunConfig().validate()
    assert config.rtol == 1e-9 and config.atol == 1e-12
    assert config.blowup_bound == 1e12
    assert config.boundary_margin == pytest.approx(1e-9)


def test_overrides_ignore_none():
    config = RunConfig().with_overrides(nt=5, nx=None, resolution=0.01)
    assert config.nt == 5
    assert config.nx == 41
    assert config.resolution == 0.01


@pytest.mark.parametrize("field, value", [("rtol", 0.0), ("nx", 1), ("blowup_bound", -1.0), ("seed", -3)])
def test_invalid_values(field, value):
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(**{field: value})


def test_json_round_trip():
    config = RunConfig(nt=7, seed=3, output_dir="out")
    assert RunConfig.from_json(config.to_json()) == config


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_json({"rtol": 1e-8, "tolerance": 1})
