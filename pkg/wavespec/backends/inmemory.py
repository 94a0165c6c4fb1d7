from threading import Lock
from typing import Dict, Optional

from wavespec.types import Backend


class InMemoryBackend(Backend):
    """Process-local store shared by every instance."""

    _store: Dict[str, bytes] = {}
    _lock = Lock()

    def get(self, key: str) -> Optional[bytes]:
        with self._lock:
            return self._store.get(key)

    def set(self, key: str, value: bytes) -> None:
        with self._lock:
            self._store[key] = value

    def clear(self, namespace: Optional[str] = None, key: Optional[str] = None) -> int:
        count = 0
        with self._lock:
            if namespace:
                keys = list(self._store.keys())
                for k in keys:
                    if k.startswith(namespace):
                        del self._store[k]
                        count += 1
            elif key and key in self._store:
                del self._store[key]
                count += 1
        return count
