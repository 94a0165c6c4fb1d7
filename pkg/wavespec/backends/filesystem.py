import logging
import os
from pathlib import Path
from typing import Optional, Union
from urllib.parse import quote, unquote

from wavespec.types import Backend

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

SUFFIX = ".bin"


class FileBackend(Backend):
    """One file per key under ``directory``; keys are URL-quoted into file names."""

    def __init__(self, directory: Union[str, "os.PathLike[str]"]) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / (quote(key, safe="") + SUFFIX)

    def get(self, key: str) -> Optional[bytes]:
        path = self._path(key)
        if not path.is_file():
            return None
        return path.read_bytes()

    def set(self, key: str, value: bytes) -> None:
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(value)
        os.replace(tmp, path)
        logger.debug(f"stored {len(value)} bytes for {key}")

    def clear(self, namespace: Optional[str] = None, key: Optional[str] = None) -> int:
        count = 0
        if namespace:
            for path in self.directory.glob("*" + SUFFIX):
                if unquote(path.name[: -len(SUFFIX)]).startswith(namespace):
                    path.unlink()
                    count += 1
        elif key:
            path = self._path(key)
            if path.is_file():
                path.unlink()
                count += 1
        return count
