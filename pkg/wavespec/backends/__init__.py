from wavespec.backends import filesystem, inmemory
from wavespec.types import Backend

__all__ = ["Backend", "filesystem", "inmemory"]
