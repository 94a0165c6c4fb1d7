import dataclasses
import hashlib
from typing import Any, Callable, Dict, Tuple

import numpy as np
from pydantic import BaseModel


def canonical(value: Any) -> str:
    """Stable text form of solver inputs, used to derive cache keys."""
    if isinstance(value, np.ndarray):
        digest = hashlib.sha256(np.ascontiguousarray(value).tobytes()).hexdigest()
        return f"ndarray({value.dtype},{value.shape},{digest})"
    if isinstance(value, BaseModel):
        return f"{type(value).__name__}({value.model_dump_json()})"
    if hasattr(value, "name") and hasattr(value, "params") and hasattr(value, "n_species"):
        params = ",".join(f"{k}={v!r}" for k, v in sorted(value.params.items()))
        return f"model({value.name};{params})"
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        fields = ",".join(
            f"{f.name}={canonical(getattr(value, f.name))}"
            for f in dataclasses.fields(value)
        )
        return f"{type(value).__name__}({fields})"
    if isinstance(value, dict):
        items = ",".join(f"{k!r}:{canonical(v)}" for k, v in sorted(value.items()))
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical(v) for v in value) + "]"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return repr(value)


def default_key_builder(
    func: Callable[..., Any],
    namespace: str = "",
    *,
    args: Tuple[Any, ...],
    kwargs: Dict[str, Any],
) -> str:
    cache_key = hashlib.md5(  # noqa: S324
        f"{func.__module__}:{func.__name__}:{canonical(args)}:{canonical(kwargs)}".encode()
    ).hexdigest()
    return f"{namespace}:{cache_key}"
