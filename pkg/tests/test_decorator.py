from pathlib import Path
from typing import Dict, List

import pytest

from wavespec import WaveSpec
from wavespec.backends.filesystem import FileBackend
from wavespec.backends.inmemory import InMemoryBackend
from wavespec.coder import JsonCoder
from wavespec.decorator import cache
from wavespec.model import make_gsk

calls: List[float] = []


@cache(namespace="test")
def expensive(L: float, scale: float = 1.0) -> Dict[str, float]:
    calls.append(L)
    return {"L": L, "value": L * scale}


@pytest.fixture(autouse=True)
def _clear_calls() -> None:  # pyright: ignore[reportUnusedFunction]
    calls.clear()


def test_without_backend_always_computes() -> None:
    WaveSpec.init()
    expensive(6.0)
    expensive(6.0)
    assert calls == [6.0, 6.0]


def test_hit_after_miss() -> None:
    WaveSpec.init(InMemoryBackend())
    assert expensive(6.0) == {"L": 6.0, "value": 6.0}
    assert expensive(6.0) == {"L": 6.0, "value": 6.0}
    assert calls == [6.0]
    expensive(6.0, scale=2.0)
    assert calls == [6.0, 6.0]


def test_disabled_cache() -> None:
    WaveSpec.init(InMemoryBackend(), enable=False)
    expensive(5.9)
    expensive(5.9)
    assert calls == [5.9, 5.9]


def test_model_arguments_share_keys() -> None:
    WaveSpec.init(InMemoryBackend())

    @cache(namespace="models")
    def describe(m: object) -> str:
        calls.append(0.0)
        return repr(m)

    describe(make_gsk(0.5, 0.2, 0.2, 0.001))
    describe(make_gsk(0.5, 0.2, 0.2, 0.001))
    assert len(calls) == 1


def test_custom_coder(tmp_path: Path) -> None:
    backend = FileBackend(tmp_path)
    WaveSpec.init(backend, coder=JsonCoder)
    expensive(3.45)
    assert expensive(3.45)["value"] == 3.45
    assert calls == [3.45]
    assert len(list(tmp_path.glob("*.bin"))) == 1


def test_corrupt_entry_recomputes(tmp_path: Path) -> None:
    backend = FileBackend(tmp_path)
    WaveSpec.init(backend)
    expensive(7.0)
    for path in tmp_path.glob("*.bin"):
        path.write_bytes(b"not a pickle")
    assert expensive(7.0)["L"] == 7.0
    assert calls == [7.0, 7.0]


def test_clear_namespace() -> None:
    WaveSpec.init(InMemoryBackend())
    expensive(1.0)
    expensive(2.0)
    assert WaveSpec.clear("test") == 2
    expensive(1.0)
    assert calls == [1.0, 2.0, 1.0]
