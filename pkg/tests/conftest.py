from typing import Any, Generator

import pytest

from wavespec import WaveSpec
from wavespec.backends.inmemory import InMemoryBackend
from wavespec.model import GSKModel, PolynomialScalarModel, make_gsk, make_scalar


@pytest.fixture(autouse=True)
def _reset_settings() -> Generator[Any, Any, None]:  # pyright: ignore[reportUnusedFunction]
    yield
    WaveSpec.reset()
    InMemoryBackend().clear(namespace="wavespec")


@pytest.fixture()
def gsk() -> GSKModel:
    return make_gsk(A=0.5, B=0.2, C=0.2, D=0.001)


@pytest.fixture()
def heat() -> PolynomialScalarModel:
    return make_scalar(diffusion=[1.0], reaction=[0.0])


@pytest.fixture()
def bistable() -> PolynomialScalarModel:
    """``u_t = u_xx + u (1 - u) (u - 0.3)``."""
    mu = 0.3
    return make_scalar(diffusion=[1.0], reaction=[0.0, -mu, 1.0 + mu, -1.0])
