import logging
import sys
from functools import wraps
from typing import Callable, Optional, Type, TypeVar, cast

if sys.version_info >= (3, 10):
    from typing import ParamSpec
else:
    from typing_extensions import ParamSpec

from wavespec import WaveSpec
from wavespec.coder import Coder
from wavespec.types import KeyBuilder

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())
P = ParamSpec("P")
R = TypeVar("R")


def _uncacheable() -> bool:
    """Caching is off globally or no backend is configured."""
    return not WaveSpec.get_enable() or WaveSpec.get_backend() is None


def cache(
    namespace: str = "",
    coder: Optional[Type[Coder]] = None,
    key_builder: Optional[KeyBuilder] = None,
) -> Callable[[Callable[P, R]], Callable[P, R]]:
    """
    memoize a pure computation through the configured backend
    :param namespace:
    :param coder:
    :param key_builder:

    :return:
    """

    def wrapper(func: Callable[P, R]) -> Callable[P, R]:
        @wraps(func)
        def inner(*args: P.args, **kwargs: P.kwargs) -> R:
            if _uncacheable():
                return func(*args, **kwargs)

            backend = WaveSpec.get_backend()
            assert backend is not None  # noqa: S101  # assertion is a type guard
            prefix = WaveSpec.get_prefix()
            active_coder = coder or WaveSpec.get_coder()
            builder = key_builder or WaveSpec.get_key_builder()
            cache_key = builder(func, f"{prefix}:{namespace}", args=args, kwargs=dict(kwargs))

            try:
                cached = backend.get(cache_key)
            except Exception:
                logger.warning(
                    f"Error retrieving cache key '{cache_key}' from backend:",
                    exc_info=True,
                )
                cached = None

            if cached is not None:  # cache hit
                try:
                    return cast(R, active_coder.decode(cached))
                except Exception:
                    logger.warning(
                        f"Error decoding cache key '{cache_key}', recomputing:",
                        exc_info=True,
                    )

            result = func(*args, **kwargs)
            try:
                backend.set(cache_key, active_coder.encode(result))
            except Exception:
                logger.warning(
                    f"Error setting cache key '{cache_key}' in backend:",
                    exc_info=True,
                )
            return result

        return inner

    return wrapper
