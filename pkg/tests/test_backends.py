from pathlib import Path

from wavespec.backends.filesystem import FileBackend
from wavespec.backends.inmemory import InMemoryBackend


def test_inmemory_roundtrip() -> None:
    backend = InMemoryBackend()
    backend.set("wavespec:a:1", b"one")
    assert backend.get("wavespec:a:1") == b"one"
    assert InMemoryBackend().get("wavespec:a:1") == b"one"
    assert backend.get("wavespec:a:2") is None


def test_inmemory_clear() -> None:
    backend = InMemoryBackend()
    backend.set("wavespec:a:1", b"one")
    backend.set("wavespec:a:2", b"two")
    backend.set("wavespec:b:1", b"three")
    assert backend.clear(namespace="wavespec:a") == 2
    assert backend.clear(key="wavespec:b:1") == 1
    assert backend.clear(key="wavespec:b:1") == 0


def test_file_backend(tmp_path: Path) -> None:
    backend = FileBackend(tmp_path / "cache")
    key = "wavespec:branch:0f/../x"
    backend.set(key, b"payload")
    assert backend.get(key) == b"payload"
    files = list((tmp_path / "cache").iterdir())
    assert len(files) == 1
    assert files[0].parent == tmp_path / "cache"
    assert not list((tmp_path / "cache").glob("*.tmp"))


def test_file_backend_clear(tmp_path: Path) -> None:
    backend = FileBackend(tmp_path)
    backend.set("wavespec:branch:1", b"1")
    backend.set("wavespec:branch:2", b"2")
    backend.set("wavespec:other:1", b"3")
    assert backend.clear(namespace="wavespec:branch") == 2
    assert backend.get("wavespec:other:1") == b"3"
    assert backend.clear(key="wavespec:other:1") == 1
    assert backend.get("wavespec:other:1") is None
