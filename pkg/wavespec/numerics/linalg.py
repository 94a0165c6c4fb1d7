import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import fft, linalg

from wavespec.errors import NumericalError
from wavespec.types import ComplexArray, FloatArray

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


class EigenPairs(NamedTuple):
    values: ComplexArray
    vectors: ComplexArray

    def pairs(self) -> List[Tuple[complex, ComplexArray]]:
        return [(complex(v), self.vectors[:, j]) for j, v in enumerate(self.values)]


def eig_dense(matrix: np.ndarray) -> EigenPairs:
    """All eigenvalues and right eigenvectors of a dense square matrix.

    Real input stays real so LAPACK returns exact conjugate pairs.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"eig_dense needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("eig_dense: matrix has non-finite entries")
    if not np.iscomplexobj(a):
        a = a.astype(float)
    w, v = linalg.eig(a, check_finite=False)
    return EigenPairs(np.asarray(w, dtype=complex), np.asarray(v, dtype=complex))


def wavenumbers(m: int, period: float) -> FloatArray:
    return 2.0 * np.pi * fft.fftfreq(m, d=period / m)


def spectral_derivative(values: np.ndarray, period: float, order: int = 1) -> FloatArray:
    """Fourier derivative of uniformly sampled periodic data along the last axis."""
    vals = np.asarray(values, dtype=float)
    m = vals.shape[-1]
    k = wavenumbers(m, period)
    if m % 2 == 0 and order % 2 == 1:
        k[m // 2] = 0.0
    spec = fft.fft(vals, axis=-1) * (1j * k) ** order
    return np.asarray(fft.ifft(spec, axis=-1).real, dtype=float)


def differentiation_matrix(
    m: int,
    period: float,
    shift: float = 0.0,
    order: int = 1,
    complex_modes: bool = False,
) -> ComplexArray:
    """Dense Fourier matrix of ``(d/dx + i*shift)^order`` on ``m`` uniform points.

    For real data the Nyquist wavenumber of odd derivatives is dropped. A
    shift or ``complex_modes`` keeps every grid mode ``k = -m/2 .. m/2 - 1``
    with its own symbol.
    """
    k = wavenumbers(m, period)
    real = shift == 0.0 and not complex_modes
    if m % 2 == 0 and real and order % 2 == 1:
        k[m // 2] = 0.0
    eye = np.eye(m)
    d = fft.ifft((1j * (k + shift))[:, np.newaxis] ** order * fft.fft(eye, axis=0), axis=0)
    if real:
        return np.asarray(d.real, dtype=complex)
    return np.asarray(d, dtype=complex)


def central_derivative(values: np.ndarray, x: np.ndarray, order: int = 1) -> FloatArray:
    """Fourth-order central differences on uniform meshes, second order otherwise."""
    vals = np.asarray(values, dtype=float)
    xs = np.asarray(x, dtype=float)
    out = vals
    for _ in range(order):
        out = _first_derivative(out, xs)
    return out


def _first_derivative(vals: FloatArray, x: FloatArray) -> FloatArray:
    h = np.diff(x)
    d = np.gradient(vals, x, axis=-1, edge_order=2)
    if x.size >= 5 and np.allclose(h, h[0], rtol=1e-10, atol=0.0):
        step = h[0]
        inner = (
            -vals[..., 4:] + 8.0 * vals[..., 3:-1] - 8.0 * vals[..., 1:-3] + vals[..., :-4]
        ) / (12.0 * step)
        d[..., 2:-2] = inner
    return np.asarray(d, dtype=float)


class PeriodicInterpolant:
    """Trigonometric interpolant of uniformly sampled periodic fields.

    ``samples`` has shape ``(F, M)`` for ``F`` fields on ``x_j = j * period / M``.
    """

    def __init__(self, samples: np.ndarray, period: float, origin: float = 0.0) -> None:
        vals = np.atleast_2d(np.asarray(samples))
        self.period = float(period)
        self.origin = float(origin)
        self.m = vals.shape[-1]
        self.complex = bool(np.iscomplexobj(vals))
        coeffs = fft.fft(vals, axis=-1) / self.m
        k = fft.fftfreq(self.m, d=1.0 / self.m)
        if self.m % 2 == 0:
            # split the Nyquist mode evenly so real data stays real off-grid
            nyq = self.m // 2
            coeffs = np.concatenate([coeffs, 0.5 * coeffs[:, nyq : nyq + 1]], axis=1)
            coeffs[:, nyq] *= 0.5
            k = np.concatenate([k, [float(nyq)]])
            k[nyq] = -float(nyq)
        self._coeffs = coeffs
        self._k = 2.0 * np.pi * k / self.period

    @property
    def modes(self) -> FloatArray:
        """Angular wavenumbers of the basis functions."""
        return np.asarray(self._k, dtype=float)

    @property
    def n_fields(self) -> int:
        return int(self._coeffs.shape[0])

    def basis(self, x: np.ndarray) -> ComplexArray:
        xs = np.asarray(x, dtype=float) - self.origin
        return np.exp(1j * np.outer(self._k, xs))

    def __call__(self, x: np.ndarray, basis: Optional[ComplexArray] = None) -> np.ndarray:
        e = self.basis(x) if basis is None else basis
        vals = self._coeffs @ e
        if self.complex:
            return np.asarray(vals)
        return np.asarray(vals.real, dtype=float)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        e = self.basis(x)
        vals = (self._coeffs * (1j * self._k)) @ e
        return np.asarray(vals if self.complex else vals.real)
