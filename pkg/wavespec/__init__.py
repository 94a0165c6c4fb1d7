import os
from importlib.metadata import PackageNotFoundError, version
from typing import ClassVar, Optional, Type

from wavespec.coder import Coder, PickleCoder
from wavespec.key_builder import default_key_builder
from wavespec.types import Backend, KeyBuilder

try:
    __version__ = version("wavespec")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.0.0"

__all__ = [
    "Backend",
    "Coder",
    "KeyBuilder",
    "PickleCoder",
    "WaveSpec",
    "default_key_builder",
]

THREADS_ENV = "WAVESPEC_THREADS"


class WaveSpec:
    """Process-wide settings shared by the solvers and the result cache."""

    _backend: ClassVar[Optional[Backend]] = None
    _prefix: ClassVar[Optional[str]] = None
    _init: ClassVar[bool] = False
    _coder: ClassVar[Optional[Type[Coder]]] = None
    _key_builder: ClassVar[Optional[KeyBuilder]] = None
    _threads: ClassVar[int] = 1
    _enable: ClassVar[bool] = True

    @classmethod
    def init(
        cls,
        backend: Optional[Backend] = None,
        prefix: str = "wavespec",
        coder: Type[Coder] = PickleCoder,
        key_builder: KeyBuilder = default_key_builder,
        threads: int = 1,
        enable: bool = True,
    ) -> None:
        if cls._init:
            return
        cls._init = True
        cls._backend = backend
        cls._prefix = prefix
        cls._coder = coder
        cls._key_builder = key_builder
        cls._threads = max(1, int(threads))
        cls._enable = enable

    @classmethod
    def reset(cls) -> None:
        cls._init = False
        cls._backend = None
        cls._prefix = None
        cls._coder = None
        cls._key_builder = None
        cls._threads = 1
        cls._enable = True

    @classmethod
    def get_backend(cls) -> Optional[Backend]:
        return cls._backend

    @classmethod
    def get_prefix(cls) -> str:
        return cls._prefix if cls._prefix is not None else "wavespec"

    @classmethod
    def get_coder(cls) -> Type[Coder]:
        return cls._coder or PickleCoder

    @classmethod
    def get_key_builder(cls) -> KeyBuilder:
        return cls._key_builder or default_key_builder

    @classmethod
    def get_threads(cls) -> int:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                pass
        return cls._threads

    @classmethod
    def get_enable(cls) -> bool:
        return cls._enable

    @classmethod
    def clear(cls, namespace: Optional[str] = None, key: Optional[str] = None) -> int:
        if cls._backend is None:
            return 0
        namespace = cls.get_prefix() + (":" + namespace if namespace else "")
        return cls._backend.clear(namespace, key)
