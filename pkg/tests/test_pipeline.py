from pathlib import Path

import numpy as np
import pytest

from wavespec.coder import CsvCoder
from wavespec.config import RunConfig
from wavespec.dispersion import dispersion_matrix, gsk_family
from wavespec.errors import ConfigError, NumericalError
from wavespec.localized import scalar_front_fixture
from wavespec.model import GSKModel, make_scalar
from wavespec.pipeline import (
    Artifacts,
    bloch_at,
    branch_profile,
    onset_bracket,
    read_field,
    read_profile,
    run_task,
    species_names,
    wavetrain_branch,
    write_profile,
)
from wavespec.wavetrain import detect_fold


@pytest.fixture()
def artifacts(tmp_path: Path) -> Artifacts:
    return Artifacts(tmp_path / "out", RunConfig.from_mapping({}))


def test_artifacts_carry_provenance(artifacts: Artifacts) -> None:
    path = artifacts.csv("table.csv", ["a", "b"], [[1, 2.5]], comments=["note=1"])
    table = CsvCoder.decode(path.read_bytes())
    assert table.provenance == artifacts.provenance
    assert table.comments == ["note=1"]
    assert artifacts.json("summary.json", {"ok": True}).exists()
    assert [p.name for p in artifacts.written] == ["table.csv", "summary.json"]


def test_species_names(gsk: GSKModel) -> None:
    assert species_names(gsk) == ["w", "v"]
    assert species_names(make_scalar()) == ["u"]


def test_profile_files(artifacts: Artifacts) -> None:
    m, front = scalar_front_fixture(0.3, window=10.0, n_nodes=201)
    path = write_profile(artifacts, "front.csv", front, m)
    assert CsvCoder.decode(path.read_bytes()).header == ["x", "u", "ux"]
    back = read_profile(path, m)
    assert back.kind == "front"
    assert back.c == front.c
    np.testing.assert_allclose(back.mesh.values, front.mesh.values)

    bare = artifacts.csv("bare.csv", ["x", "u", "ux"], [[0.0, 1.0, 0.0]])
    with pytest.raises(ConfigError):
        read_profile(bare, m)
    with pytest.raises(ConfigError):
        read_field(path, 3)


def test_onset_bracket() -> None:
    family = gsk_family(0.2, 0.2, 0.001)
    kappa = 2.0 * np.pi / 6.0

    def growth(a: float) -> float:
        m, eq = family(a)
        return float(np.max(np.linalg.eigvals(dispersion_matrix(m, eq, 0.0, kappa)).real))

    lo, hi = onset_bracket(family, kappa, (0.17, 2.0))
    assert lo < hi
    assert growth(lo) * growth(hi) < 0.0
    with pytest.raises(NumericalError):
        onset_bracket(family, kappa, (1.5, 2.0))


def test_run_task_writes_into_directory(tmp_path: Path) -> None:
    config = RunConfig.from_mapping({"task": "equilibria", "model": {"A": 0.1}})
    summary = run_task(config, tmp_path / "eq")
    assert (tmp_path / "eq" / "equilibria.csv").exists()
    assert summary == {"n_equilibria": 1}


@pytest.mark.slow()
def test_gsk_branch_has_one_fold() -> None:
    config = RunConfig.from_mapping({})
    seed, branch = wavetrain_branch(config.model, config.wavetrain)
    assert seed.profile.params["A"] == pytest.approx(0.02)
    folds = [f for f in detect_fold(branch) if 3.0 <= f.parameter <= 10.0]
    assert len(folds) == 1
    assert folds[0].parameter == pytest.approx(3.45, abs=0.1)
    assert folds[0].measure is not None
    assert 0.4 <= folds[0].measure <= 0.6
    L, s = branch.parameters, branch.measures
    far = s[(L >= 40.0) & (L <= 80.0)]
    assert far.size
    assert 0.9 <= float(np.max(far)) <= 1.1


@pytest.mark.slow()
def test_gsk_sideband_change(tmp_path: Path) -> None:
    config = RunConfig.from_mapping({"task": "sideband"})
    _, branch = wavetrain_branch(config.model, config.wavetrain)
    below, _ = bloch_at(config, branch_profile(branch, 5.9, config.sideband.segment))
    above, _ = bloch_at(config, branch_profile(branch, 6.1, config.sideband.segment))
    assert below.curvature < 0.0
    assert above.curvature > 0.0
    assert below.cross_error <= 1e-5
    assert abs(below.translation) <= 1e-6
    assert below.alignment >= 1.0 - 1e-6
    summary = run_task(config, tmp_path / "sideband")
    assert summary["L_star"] == pytest.approx(5.98, abs=0.05)
