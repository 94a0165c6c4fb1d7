from pathlib import Path
from typing import Any, Dict, List, Optional

import pytest

from wavespec import WaveSpec
from wavespec.backends.filesystem import FileBackend
from wavespec.backends.inmemory import InMemoryBackend
from wavespec.cli import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, main
from wavespec.coder import CsvCoder, CsvTable
from wavespec.config import RunConfig
from wavespec.types import Backend


def write_config(path: Path, body: str) -> Path:
    path.write_text(body)
    return path


def read_table(path: Path) -> CsvTable:
    return CsvCoder.decode(path.read_bytes())


def test_equilibria(tmp_path: Path) -> None:
    out = tmp_path / "out"
    config = write_config(tmp_path / "run.toml", "[model]\nA = 0.5\n")
    assert main([str(config), "--task", "equilibria", "--output", str(out)]) == EXIT_OK
    table = read_table(out / "equilibria.csv")
    assert len(table.rows) == 3
    assert sorted(table.column("label")) == ["desert", "minus", "plus"]
    assert table.provenance is not None
    assert table.provenance.startswith("config=")


def test_dispersion(tmp_path: Path) -> None:
    out = tmp_path / "out"
    config = write_config(
        tmp_path / "run.toml",
        'task = "dispersion"\n[model]\nA = 0.43\n[dispersion]\nn_kappa = 401\n',
    )
    assert main([str(config), "--output", str(out)]) == EXIT_OK
    summary = read_table(out / "dispersion_summary.csv")
    assert summary.column("max_re_lambda")[0] > 0.0
    assert len(read_table(out / "dispersion.csv").rows) > 0


def test_invalid_config_writes_nothing(tmp_path: Path) -> None:
    out = tmp_path / "out"
    config = write_config(
        tmp_path / "run.toml", "[dispersion]\nonset_tol = -1e-4\n"
    )
    assert main([str(config), "--output", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_missing_config(tmp_path: Path) -> None:
    assert main([str(tmp_path / "missing.toml")]) == EXIT_CONFIG


def test_gsk_only_task(tmp_path: Path) -> None:
    config = write_config(
        tmp_path / "run.toml", '[model]\nname = "scalar"\nreaction = [0.0, 1.0]\n'
    )
    code = main([str(config), "--task", "turing-hopf", "--output", str(tmp_path / "out")])
    assert code == EXIT_CONFIG


def test_unknown_task() -> None:
    with pytest.raises(SystemExit):
        main(["--task", "nonsense"])


@pytest.mark.slow()
def test_evans(tmp_path: Path) -> None:
    out = tmp_path / "out"
    config = write_config(
        tmp_path / "run.toml",
        'task = "evans"\n[evans]\nn_re = 2\nn_im = 2\nn_contour = 16\nchunks = 16\n',
    )
    assert main([str(config), "--output", str(out)]) == EXIT_OK
    summary = read_table(out / "evans_summary.csv")
    assert summary.column("winding") == [0]


def test_missing_state(tmp_path: Path) -> None:
    out = tmp_path / "out"
    # A = 0.1 < 4 B^2 leaves only the desert state
    config = write_config(tmp_path / "run.toml", 'task = "dispersion"\n[model]\nA = 0.1\n')
    assert main([str(config), "--output", str(out)]) == EXIT_CONFIG
    assert not (out / "error.json").exists()


@pytest.mark.slow()
def test_reproduce_paper(tmp_path: Path) -> None:
    out = tmp_path / "out"
    config = write_config(tmp_path / "run.toml", 'task = "reproduce-paper"\n')
    assert main([str(config), "--output", str(out)]) in (EXIT_OK, EXIT_ACCEPTANCE)
    summary = read_table(out / "summary.csv")
    assert set(summary.column("status")) <= {"PASS", "FAIL"}
    targets = dict(zip(summary.column("target"), summary.column("status")))
    assert targets["equilibria at A=0.5"] == "PASS"
    assert targets["fold L"] == "PASS"
    assert targets["sideband L*"] == "PASS"
    assert (out / "branch.csv").exists()


@pytest.mark.parametrize(("body", "expected"), [("", InMemoryBackend), ("cache_dir = 'cache'\n", FileBackend)])
def test_task_results_are_cached(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch, body: str, expected: type
) -> None:
    seen: List[Optional[Backend]] = []

    def run(config: RunConfig, directory: Path) -> Dict[str, Any]:
        seen.append(WaveSpec.get_backend())
        return {}

    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr("wavespec.cli.run_task", run)
    config = write_config(tmp_path / "run.toml", f"[output]\n{body}")
    assert main([str(config), "--task", "equilibria"]) == EXIT_OK
    assert isinstance(seen[0], expected)
    assert WaveSpec.get_backend() is None
