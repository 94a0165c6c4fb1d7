from pathlib import Path
from typing import Any, Dict

import pytest

from wavespec.config import TASKS, RunConfig
from wavespec.errors import ConfigError
from wavespec.model import GSKModel, PolynomialScalarModel


def test_defaults() -> None:
    config = RunConfig()
    assert config.task == "equilibria"
    assert config.model.B == 0.2
    assert config.model.D == 0.001
    assert config.dispersion.onset_bracket == (0.43, 0.63)
    assert config.bloch.L_values == [5.9, 5.98, 6.1]
    assert "reproduce-paper" in TASKS


def test_from_toml(tmp_path: Path) -> None:
    path = tmp_path / "run.toml"
    path.write_text(
        'task = "dispersion"\n'
        "threads = 2\n"
        "[model]\n"
        "A = 0.43\n"
        "[dispersion]\n"
        "kappa_max = 5.0\n"
        "n_kappa = 51\n"
    )
    config = RunConfig.from_toml(path)
    assert config.task == "dispersion"
    assert config.threads == 2
    m = config.model.build()
    assert isinstance(m, GSKModel)
    assert m.params["A"] == 0.43


def test_scalar_model() -> None:
    config = RunConfig.from_mapping(
        {"model": {"name": "scalar", "diffusion": [1.0, 0.5], "reaction": [0.0, 1.0]}}
    )
    m = config.model.build()
    assert isinstance(m, PolynomialScalarModel)
    assert m.params["d01"] == 0.5
    assert m.params["r01"] == 1.0


def test_overrides() -> None:
    m = RunConfig().model.build(A=0.6)
    assert m.params["A"] == 0.6


@pytest.mark.parametrize(
    "data",
    [
        {"task": "unknown"},
        {"unknown_table": {}},
        {"model": {"D": 0.0}},
        {"model": {"A": -1.0}},
        {"dispersion": {"onset_tol": -1e-4}},
        {"dispersion": {"onset_bracket": [0.6, 0.4]}},
        {"wavetrain": {"n_nodes": 512, "max_nodes": 256}},
        {"evans": {"mu": 1.5}},
        {"simulate": {"scheme": "rk4"}},
        {"threads": 0},
    ],
)
def test_invalid(data: Dict[str, Any]) -> None:
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(data)


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.from_toml(tmp_path / "missing.toml")


def test_bad_toml(tmp_path: Path) -> None:
    path = tmp_path / "bad.toml"
    path.write_text("task = \n")
    with pytest.raises(ConfigError):
        RunConfig.from_toml(path)


def test_config_hash() -> None:
    a = RunConfig.from_mapping({"model": {"A": 0.5}})
    b = RunConfig.from_mapping({"model": {"A": 0.5}})
    c = RunConfig.from_mapping({"model": {"A": 0.51}})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 16
