import abc
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import sparse
from typing_extensions import Protocol

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
BoolArray = npt.NDArray[np.bool_]
AnyArray = npt.NDArray[Any]

_Func = Callable[..., Any]
SparseOrDense = Union[FloatArray, sparse.spmatrix]


class Residual(Protocol):
    def __call__(self, __x: FloatArray) -> FloatArray:
        ...


class Jacobian(Protocol):
    def __call__(self, __x: FloatArray) -> SparseOrDense:
        ...


class VectorField(Protocol):
    """Vectorized right-hand side ``(x, y, theta) -> y'``.

    ``x`` has shape ``(K,)``, ``y`` has shape ``(n, K)`` and the result has the
    shape of ``y``. ``theta`` carries the free scalars of the problem (a wave
    speed, a model parameter) and may be empty.
    """

    def __call__(
        self, __x: FloatArray, __y: FloatArray, __theta: FloatArray
    ) -> FloatArray:
        ...


class FieldJacobian(Protocol):
    def __call__(
        self, __x: FloatArray, __y: FloatArray, __theta: FloatArray
    ) -> FloatArray:
        ...


class KeyBuilder(Protocol):
    def __call__(
        self,
        __function: _Func,
        __namespace: str = ...,
        *,
        args: Tuple[Any, ...],
        kwargs: Dict[str, Any],
    ) -> str:
        ...


class Backend(abc.ABC):
    @abc.abstractmethod
    def get(self, key: str) -> Optional[bytes]:
        raise NotImplementedError

    @abc.abstractmethod
    def set(self, key: str, value: bytes) -> None:
        raise NotImplementedError

    @abc.abstractmethod
    def clear(self, namespace: Optional[str] = None, key: Optional[str] = None) -> int:
        raise NotImplementedError
