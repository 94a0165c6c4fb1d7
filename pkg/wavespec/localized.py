"""Spectra of fronts and pulses with constant asymptotic states.

The essential spectrum is read off the dispersion curves of the two limits;
Fredholm properties come from Morse indices of the asymptotic first-order
matrices, and point spectrum from an Evans function built by continuous
orthonormalization.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import interpolate, linalg

from wavespec import WaveSpec
from wavespec.bloch import companion
from wavespec.dispersion import SpectralCurve, spectrum_homogeneous
from wavespec.equilibria import Equilibrium
from wavespec.errors import FredholmError, StiffnessError, WaveSpecError
from wavespec.model import ModelSpec, check_parabolic, linearization_coefficients, make_scalar
from wavespec.numerics.collocation import MeshFunction
from wavespec.numerics.ivp import integrate_ivp
from wavespec.types import ComplexArray, FloatArray
from wavespec.wavetrain import WaveProfile

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

AXIS_TOL = 1e-10
DECAY_TOL = 1e-8
COLLISION_TOL = 1e-6
N_CHUNKS = 64

State = Union[Equilibrium, Sequence[float], FloatArray]


def _state(u: State) -> FloatArray:
    return u.state if isinstance(u, Equilibrium) else np.asarray(u, dtype=float)


@dataclass
class AsymptoticPencil:
    """Constant coefficients at one end of a front or pulse."""

    side: str
    alpha: FloatArray
    beta: FloatArray
    gamma: FloatArray

    def matrix(self, lam: complex) -> ComplexArray:
        return companion(self.alpha, self.beta, self.gamma, lam)

    def spatial_eigenvalues(self, lam: complex) -> ComplexArray:
        return np.asarray(linalg.eigvals(self.matrix(lam)), dtype=complex)

    def morse_index(self, lam: complex, tol: float = AXIS_TOL) -> Tuple[int, bool]:
        """Count of ``Re mu > 0`` and whether ``A(lambda)`` is hyperbolic."""
        re = self.spatial_eigenvalues(lam).real
        return int(np.sum(re > tol)), bool(np.all(np.abs(re) > tol))


def asymptotic_pencil(m: ModelSpec, u: State, c: float, side: str) -> AsymptoticPencil:
    state = _state(u)
    zero = np.zeros_like(state)
    d1, d2 = m.reaction_jacobians(state, zero)
    eye = np.eye(m.n_species)
    return AsymptoticPencil(
        side,
        np.asarray(m.diffusion(state), dtype=float),
        np.asarray(c * eye + d2, dtype=float),
        np.asarray(d1, dtype=float),
    )


def essential_boundary(
    m: ModelSpec,
    u_minus: State,
    u_plus: State,
    c: float = 0.0,
    kappas: Optional[FloatArray] = None,
) -> Dict[str, List[SpectralCurve]]:
    """Dispersion curves of both asymptotic states.

    For a pulse (equal limits) they are the essential spectrum; for a front
    they bound the regions of constant Fredholm index.
    """
    for u in (u_minus, u_plus):
        if not check_parabolic(m, _state(u)):
            raise WaveSpecError(f"asymptotic state {_state(u)} is not parabolic")
    minus = spectrum_homogeneous(m, u_minus, c, kappas)
    if np.allclose(_state(u_minus), _state(u_plus), rtol=0.0, atol=1e-12):
        return {"-": minus, "+": minus}
    return {"-": minus, "+": spectrum_homogeneous(m, u_plus, c, kappas)}


@dataclass
class FredholmReport:
    i_minus: int
    i_plus: int
    hyperbolic_minus: bool
    hyperbolic_plus: bool
    index: Optional[int]
    ambiguous: bool = False

    @property
    def fredholm(self) -> bool:
        return self.index is not None


def morse_fredholm(
    minus: AsymptoticPencil, plus: AsymptoticPencil, lam: complex, tol: float = AXIS_TOL
) -> FredholmReport:
    """Morse indices at both ends and the Fredholm index ``i+(+inf) - i+(-inf)``.

    A spatial eigenvalue within ``tol`` of the imaginary axis makes ``lam``
    lie on a dispersion curve: the report is then not Fredholm and flagged
    ambiguous.
    """
    i_m, h_m = minus.morse_index(lam, tol)
    i_p, h_p = plus.morse_index(lam, tol)
    index = i_p - i_m if h_m and h_p else None
    return FredholmReport(i_m, i_p, h_m, h_p, index, ambiguous=not (h_m and h_p))


def _normalized_basis(
    pencil: AsymptoticPencil, lam: complex, unstable: bool, pins: Optional[List[int]]
) -> Tuple[ComplexArray, List[int], bool]:
    mu, vecs = linalg.eig(pencil.matrix(lam))
    sel = mu.real > 0 if unstable else mu.real < 0
    mu, vecs = mu[sel], vecs[:, sel]
    order = np.argsort(mu.imag + 1e-3 * mu.real, kind="stable")
    mu, vecs = mu[order], vecs[:, order]
    if pins is None or len(pins) != vecs.shape[1]:
        pins = [int(np.argmax(np.abs(vecs[:, j]))) for j in range(vecs.shape[1])]
    basis = vecs / vecs[pins, np.arange(vecs.shape[1])]
    gaps = np.abs(mu[:, np.newaxis] - mu[np.newaxis, :])
    gaps[np.diag_indices(mu.size)] = np.inf
    scale = max(1.0, float(np.max(np.abs(mu)))) if mu.size else 1.0
    degenerate = bool(mu.size > 1 and np.min(gaps) <= COLLISION_TOL * scale)
    return basis, pins, degenerate


def _decay_rate(pencil: AsymptoticPencil, unstable: bool) -> Optional[float]:
    re = pencil.spatial_eigenvalues(0j).real
    rates = re[re > AXIS_TOL] if unstable else -re[re < -AXIS_TOL]
    return float(np.min(rates)) if rates.size else None


def evans_window(
    profile: WaveProfile,
    minus: AsymptoticPencil,
    plus: AsymptoticPencil,
    tol: float = DECAY_TOL,
) -> Tuple[float, float, float]:
    """Integration window ``(x_lo, x_mid, x_hi)`` sized by the asymptotic decay rates.

    The profile approaches its limits like ``exp(-nu |x - x_mid|)`` with the
    slowest spatial decay rate ``nu`` of ``A(-/+inf, 0)``; each end is placed
    where that tail has dropped to ``tol``, measured from the steepest point
    of a front or the peak of a pulse, and clipped to the mesh.
    """
    x = profile.x
    x_lo, x_hi = float(x[0]), float(x[-1])
    if profile.kind == "homogeneous":
        return x_lo, 0.5 * (x_lo + x_hi), x_hi
    if profile.kind == "pulse":
        core = np.sum(np.abs(profile.u - profile.u[:, :1]), axis=0)
    else:
        core = np.sum(np.abs(profile.ux), axis=0)
    mid = float(x[int(np.argmax(core))])
    ends = []
    for rate, edge, sign in (
        (_decay_rate(minus, True), x_lo, -1.0),
        (_decay_rate(plus, False), x_hi, 1.0),
    ):
        if rate is None:
            ends.append(edge)
            continue
        need = mid + sign * np.log(1.0 / tol) / rate
        if sign * (need - edge) > 0.0:
            logger.warning(
                f"window end x={edge:.6g} is short of the decay length x={need:.6g}; "
                "extend the profile mesh"
            )
            ends.append(edge)
        else:
            ends.append(float(need))
    return ends[0], mid, ends[1]


class _CoefficientSpline:
    def __init__(self, profile: WaveProfile, m: ModelSpec) -> None:
        prof = profile if profile.uxx is not None else profile.with_derivatives()
        coeffs = linearization_coefficients(m, prof)
        n = m.n_species
        self.n = n
        ainv = np.linalg.inv(coeffs.alpha)
        a0 = np.zeros((coeffs.x.size, 2 * n, 2 * n))
        a0[:, :n, n:] = np.eye(n)
        a0[:, n:, :n] = -ainv @ coeffs.gamma
        a0[:, n:, n:] = -ainv @ coeffs.beta
        fields = np.concatenate([a0.reshape(coeffs.x.size, -1), ainv.reshape(coeffs.x.size, -1)], axis=1)
        self.spline = interpolate.CubicSpline(coeffs.x, fields, axis=0)

    def matrix(self, x: float, lam: complex) -> ComplexArray:
        vals = self.spline(x)
        n2 = 2 * self.n
        a = vals[: n2 * n2].reshape(n2, n2).astype(complex)
        a[self.n :, : self.n] += lam * vals[n2 * n2 :].reshape(self.n, self.n)
        return a


def _transport(
    coeffs: _CoefficientSpline,
    frame: ComplexArray,
    lam: complex,
    x0: float,
    x1: float,
    chunks: int,
    rtol: float,
) -> Tuple[ComplexArray, complex]:
    """Carry a frame from ``x0`` to ``x1`` with QR after every chunk."""
    n2, k = frame.shape
    q = frame
    log_scale = 0j

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        return (coeffs.matrix(x, lam) @ y.reshape(n2, k)).ravel()

    edges = np.linspace(x0, x1, chunks + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        out = integrate_ivp(rhs, (a, b), q.ravel(), rtol=rtol, atol=1e-14)
        q, r = np.linalg.qr(out.y_end.reshape(n2, k))
        log_scale += complex(np.sum(np.log(np.diag(r).astype(complex))))
    return q, log_scale


@dataclass
class EvansValue:
    """``E(lambda) = frame_det * exp(log_scale)``."""

    lam: complex
    frame_det: complex
    log_scale: complex
    pins: Tuple[List[int], List[int]] = field(default_factory=lambda: ([], []))
    basis_degenerate: bool = False
    window: Tuple[float, float] = (float("nan"), float("nan"))

    @property
    def value(self) -> complex:
        return complex(self.frame_det * np.exp(self.log_scale))

    @property
    def log_abs(self) -> float:
        return float(np.log(abs(self.frame_det)) + self.log_scale.real) if self.frame_det else -np.inf

    @property
    def phase(self) -> float:
        return float(np.angle(self.frame_det) + self.log_scale.imag)


def evans_function(
    m: ModelSpec,
    profile: WaveProfile,
    lam: complex,
    *,
    limits: Optional[Tuple[State, State]] = None,
    pins: Optional[Tuple[List[int], List[int]]] = None,
    chunks: int = N_CHUNKS,
    rtol: float = 1e-10,
    decay_tol: float = DECAY_TOL,
) -> EvansValue:
    """Evans function of a front or pulse on the window chosen by :func:`evans_window`.

    The unstable eigenvectors of ``A(-inf, lambda)`` and the stable ones of
    ``A(+inf, lambda)``, each scaled so one pinned component equals 1, are
    transported to the window midpoint and their determinant returned with
    the accumulated QR scale.
    """
    if profile.kind not in ("front", "pulse", "homogeneous"):
        raise ValueError(f"Evans functions need a front or pulse, got {profile.kind}")
    u_lo, u_hi = (profile.u[:, 0], profile.u[:, -1]) if limits is None else (
        _state(limits[0]),
        _state(limits[1]),
    )
    minus = asymptotic_pencil(m, u_lo, profile.c, "-")
    plus = asymptotic_pencil(m, u_hi, profile.c, "+")
    report = morse_fredholm(minus, plus, lam)
    if not report.fredholm or report.index != 0:
        raise FredholmError(
            f"lambda={lam:.6g} is not in the index-0 Fredholm region: "
            f"i(-)={report.i_minus}, i(+)={report.i_plus}, index={report.index}"
        )
    n2 = 2 * m.n_species
    y_minus, pin_m, deg_m = _normalized_basis(minus, lam, True, None if pins is None else pins[0])
    y_plus, pin_p, deg_p = _normalized_basis(plus, lam, False, None if pins is None else pins[1])
    if y_minus.shape[1] + y_plus.shape[1] != n2:
        raise FredholmError("unstable and stable subspaces do not span the phase space")

    coeffs = _CoefficientSpline(profile, m)
    x_lo, mid, x_hi = evans_window(profile, minus, plus, decay_tol)
    try:
        q_minus, s_minus = _transport(coeffs, y_minus, lam, x_lo, mid, chunks, rtol)
        q_plus, s_plus = _transport(coeffs, y_plus, lam, x_hi, mid, chunks, rtol)
    except StiffnessError as e:
        raise StiffnessError(f"Evans integration failed at lambda={lam:.6g}: {e}; shrink the window") from e
    frame = np.concatenate([q_minus, q_plus], axis=1)
    return EvansValue(
        complex(lam),
        complex(np.linalg.det(frame)),
        s_minus + s_plus,
        (pin_m, pin_p),
        deg_m or deg_p,
        (x_lo, x_hi),
    )


def circle_contour(center: complex, radius: float, n: int = 64) -> ComplexArray:
    return np.asarray(center + radius * np.exp(2j * np.pi * np.arange(n) / n), dtype=complex)


@dataclass
class WindingResult:
    winding: int
    raw: float
    values: List[EvansValue]


def evans_winding(
    m: ModelSpec,
    profile: WaveProfile,
    contour: Sequence[complex],
    *,
    limits: Optional[Tuple[State, State]] = None,
    chunks: int = N_CHUNKS,
    rtol: float = 1e-10,
) -> WindingResult:
    """Zeros of the Evans function inside a closed contour (argument principle).

    The normalizing components are pinned at the first contour point so the
    phase stays continuous along the contour.
    """
    points = np.asarray(contour, dtype=complex)
    first = evans_function(
        m, profile, complex(points[0]), limits=limits, chunks=chunks, rtol=rtol
    )

    def at(lam: complex) -> EvansValue:
        return evans_function(
            m, profile, lam, limits=limits, pins=first.pins, chunks=chunks, rtol=rtol
        )

    with ThreadPoolExecutor(max_workers=WaveSpec.get_threads()) as pool:
        rest = list(pool.map(at, points[1:]))
    values = [first, *rest]
    phase = np.array([v.phase for v in values])
    steps = np.angle(np.exp(1j * np.diff(np.append(phase, phase[0]))))
    if np.max(np.abs(steps)) > 0.5 * np.pi:
        logger.warning("Evans phase changes quickly along the contour; refine it")
    raw = float(np.sum(steps) / (2.0 * np.pi))
    return WindingResult(int(round(raw)), raw, values)


def scalar_front_fixture(
    mu: float, window: float = 30.0, n_nodes: int = 1201
) -> Tuple[ModelSpec, WaveProfile]:
    """Bistable cubic front, a test fixture with a closed form.

    ``u_t = u_xx + u (1 - u) (u - mu)`` has the front
    ``u = 1 / (1 + exp(-x / sqrt 2))`` from 0 to 1 with speed
    ``c = sqrt 2 (mu - 1/2)`` in the co-moving frame.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    m = make_scalar(diffusion=(1.0,), reaction=(0.0, -mu, 1.0 + mu, -1.0))
    x = np.linspace(-window, window, n_nodes)
    u = 1.0 / (1.0 + np.exp(-x / np.sqrt(2.0)))
    ux = u * (1.0 - u) / np.sqrt(2.0)
    uxx = (1.0 - 2.0 * u) * ux / np.sqrt(2.0)
    mesh = MeshFunction(x, np.vstack([u, ux]), 2.0 * window, periodic=False)
    c = np.sqrt(2.0) * (mu - 0.5)
    profile = WaveProfile("front", mesh, float(c), dict(m.params), m, uxx=uxx[np.newaxis])
    return m, profile


def constant_profile(
    m: ModelSpec, state: State, window: float = 10.0, n_nodes: int = 201, c: float = 0.0
) -> WaveProfile:
    """A homogeneous state viewed as a pulse on ``[-window, window]``."""
    u = np.repeat(_state(state)[:, np.newaxis], n_nodes, axis=1)
    x = np.linspace(-window, window, n_nodes)
    mesh = MeshFunction(x, np.vstack([u, np.zeros_like(u)]), 2.0 * window, periodic=False)
    return WaveProfile("homogeneous", mesh, c, dict(m.params), m, uxx=np.zeros_like(u))
