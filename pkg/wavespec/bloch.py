"""Floquet-Bloch spectra of wavetrains.

Two independent routes are provided. The Bloch operator
``alpha (d + i kappa)^2 + beta (d + i kappa) + gamma`` on one period is
discretized by Fourier collocation and solved densely. The first-order
spectral ODE ``w' = A(x, lambda) w`` is integrated over one period, split into
segments whose transfer matrices form a cyclic pencil, and the dispersion
relation ``det(Pi(lambda) - e^{i gamma}) = 0`` is solved for ``lambda``.

The Bloch parameter is stored as ``gamma = kappa L`` in ``[0, 2 pi)``.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft, linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from wavespec import WaveSpec
from wavespec.dispersion import CURVE_JUMP_TOL, SpectralCurve, match_branches
from wavespec.errors import (
    BracketError,
    CurveTrackingError,
    NumericalError,
    ParabolicityError,
    StiffnessError,
    UnreliableFitError,
)
from wavespec.model import (
    LinearizationCoefficients,
    coefficient_fields,
    linearization_coefficients,
)
from wavespec.numerics.collocation import MeshFunction
from wavespec.numerics.continuation import Branch, StepControl, arclength_continue
from wavespec.numerics.ivp import integrate_ivp
from wavespec.numerics.linalg import PeriodicInterpolant, differentiation_matrix
from wavespec.numerics.newton import newton_solve
from wavespec.types import ComplexArray, FloatArray
from wavespec.wavetrain import WaveProfile, profile_at

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

N_MODES = 40
N_GRID = 128
MAX_GRID = 1024
N_GAMMA = 64
SEGMENT_GROWTH = 8.0
MAX_SEGMENTS = 2048
ABEL_TOL = 1e-6


def default_gammas(n: int = N_GAMMA) -> FloatArray:
    return np.arange(n) * (2.0 * np.pi / n)


def _operator(
    alpha: FloatArray, beta: FloatArray, gamma: FloatArray, d1: np.ndarray, d2: np.ndarray
) -> np.ndarray:
    """Dense species-major matrix of ``alpha d2 + beta d1 + gamma`` (mesh-first coefficients)."""
    m, n, _ = alpha.shape
    op = np.einsum("xij,xy->ixjy", alpha, d2) + np.einsum("xij,xy->ixjy", beta, d1)
    idx = np.arange(m)
    op[:, idx, :, idx] += gamma
    return op.reshape(n * m, n * m)


@dataclass
class FourierWave:
    """A wavetrain resolved on a uniform Fourier grid with its linearization."""

    profile: WaveProfile
    coeffs: LinearizationCoefficients
    residual: float = 0.0
    _first_order: Optional[PeriodicInterpolant] = field(default=None, repr=False)

    @property
    def L(self) -> float:
        return self.profile.L

    @property
    def n_species(self) -> int:
        return self.profile.n_species

    @property
    def n_grid(self) -> int:
        return self.profile.mesh.n_nodes

    @property
    def first_order(self) -> PeriodicInterpolant:
        """Interpolant of ``A0 = [[0, I], [-a^-1 gamma, -a^-1 beta]]`` and ``a^-1``."""
        if self._first_order is None:
            n = self.n_species
            ainv = np.linalg.inv(self.coeffs.alpha)
            a0 = np.zeros((self.n_grid, 2 * n, 2 * n))
            a0[:, :n, n:] = np.eye(n)
            a0[:, n:, :n] = -ainv @ self.coeffs.gamma
            a0[:, n:, n:] = -ainv @ self.coeffs.beta
            samples = np.concatenate(
                [a0.reshape(self.n_grid, -1), ainv.reshape(self.n_grid, -1)], axis=1
            ).T
            self._first_order = PeriodicInterpolant(samples, self.L)
        return self._first_order

    def trace_integral(self) -> float:
        """``int_0^L tr A(x, lambda) dx = -int_0^L tr(a^-1 beta) dx``."""
        ainv = np.linalg.inv(self.coeffs.alpha)
        tr = -np.trace(ainv @ self.coeffs.beta, axis1=1, axis2=2)
        return float(np.mean(tr) * self.L)


def _tail(values: FloatArray) -> float:
    spec = np.abs(fft.rfft(values, axis=-1))
    top = float(np.max(spec)) or 1.0
    cut = 2 * spec.shape[-1] // 3
    return float(np.max(spec[..., cut:])) / top


def _spectral_residual(
    profile: WaveProfile, u: FloatArray, c: float, d1: np.ndarray, d2: np.ndarray
) -> FloatArray:
    m = profile.model
    assert m is not None  # noqa: S101  # assertion is a type guard
    ux = u @ d1.T
    uxx = u @ d2.T
    r = (
        np.einsum("ijx,jx->ix", m.diffusion(u), uxx)
        + np.einsum("ijkx,kx,jx->ix", m.diffusion_jacobian(u), ux, ux)
        + c * ux
        + m.reaction(u, ux)
    )
    return np.asarray(r, dtype=float)


def _polish(profile: WaveProfile, tol: float) -> Tuple[WaveProfile, float]:
    m = profile.model
    assert m is not None  # noqa: S101  # assertion is a type guard
    n, size = profile.n_species, profile.mesh.n_nodes
    d1 = differentiation_matrix(size, profile.L).real
    d2 = differentiation_matrix(size, profile.L, order=2).real
    ref = profile.u
    slope = ref @ d1.T
    row = slope.ravel() / float(np.linalg.norm(slope))
    offset = float(row @ ref.ravel())

    def residual(z: FloatArray) -> FloatArray:
        u = z[:-1].reshape(n, size)
        r = _spectral_residual(profile, u, float(z[-1]), d1, d2)
        return np.append(r.ravel(), row @ z[:-1] - offset)

    def jacobian(z: FloatArray) -> FloatArray:
        u = z[:-1].reshape(n, size)
        ux = u @ d1.T
        a, beta, gamma = coefficient_fields(m, u, ux, u @ d2.T, float(z[-1]))
        op = _operator(
            np.moveaxis(a, -1, 0), np.moveaxis(beta, -1, 0), np.moveaxis(gamma, -1, 0), d1, d2
        )
        top = np.hstack([op, ux.ravel()[:, np.newaxis]])
        return np.vstack([top, np.append(row, 0.0)[np.newaxis]])

    res = newton_solve(residual, np.append(ref.ravel(), profile.c), jacobian, tol=tol)
    u = res.x[:-1].reshape(n, size)
    ux = u @ d1.T
    mesh = MeshFunction.uniform(np.concatenate([u, ux]), profile.L)
    out = WaveProfile(
        profile.kind, mesh, float(res.x[-1]), dict(profile.params), m, uxx=u @ d2.T
    )
    return out, res.residual


def prepare_wave(
    profile: WaveProfile,
    n_grid: Optional[int] = None,
    *,
    tol: float = 1e-10,
    max_grid: int = MAX_GRID,
) -> FourierWave:
    """Resample a wavetrain on a uniform grid and re-solve it spectrally.

    Without ``n_grid`` the grid starts at 128 points and doubles until the
    upper third of the Fourier spectrum is below ``1e-9`` of its peak.
    """
    if profile.model is None:
        raise ValueError("profile carries no model")
    if profile.kind != "wavetrain":
        raise ValueError(f"Bloch spectra need a wavetrain, got {profile.kind}")
    size = n_grid or N_GRID
    uniform = profile.uniform(size)
    while n_grid is None and size < max_grid and _tail(uniform.mesh.values) > 1e-9:
        size *= 2
        uniform = profile.uniform(size)
    if profile.trivial:
        polished = uniform.with_derivatives()
        residual = 0.0
    else:
        polished, residual = _polish(uniform, tol)
    logger.info(f"Fourier wave on {size} points, residual {residual:.2e}, c={polished.c:.10g}")
    coeffs = linearization_coefficients(profile.model, polished)
    return FourierWave(polished, coeffs, residual)


WaveLike = Union[WaveProfile, FourierWave]


def _as_wave(obj: WaveLike) -> FourierWave:
    return obj if isinstance(obj, FourierWave) else prepare_wave(obj)


def companion(
    alpha: FloatArray, beta: FloatArray, gamma: FloatArray, lam: complex
) -> ComplexArray:
    """``[[0, I], [-a^-1 (gamma - lambda), -a^-1 beta]]`` for one set of coefficients.

    ``(phi, phi')`` solves ``w' = A w`` iff
    ``alpha phi'' + beta phi' + gamma phi = lambda phi``.
    """
    n = alpha.shape[0]
    ainv = linalg.inv(alpha)
    a = np.zeros((2 * n, 2 * n), dtype=complex)
    a[:n, n:] = np.eye(n)
    a[n:, :n] = -ainv @ (gamma - lam * np.eye(n))
    a[n:, n:] = -ainv @ beta
    return a


def firstorder_matrix(
    coeffs: LinearizationCoefficients, x: float, lam: complex
) -> ComplexArray:
    """Companion matrix of the spectral problem at position ``x``."""
    alpha, beta, gamma = coeffs.at(x)
    try:
        return companion(alpha, beta, gamma, lam)
    except linalg.LinAlgError as e:
        raise ParabolicityError(f"alpha is singular at x={x:.6g}", location=x) from e


@dataclass
class MonodromyResult:
    """Period map ``Pi(lambda) = exp(log_scale) * pi`` and its Floquet multipliers."""

    lam: complex
    pi: ComplexArray
    log_scale: float
    multipliers: ComplexArray
    vectors: ComplexArray
    transfers: ComplexArray
    log_det_predicted: float
    log_det_actual: float
    origin: float = 0.0

    @property
    def abel_residual(self) -> float:
        return abs(self.log_det_actual - self.log_det_predicted)

    @property
    def n_segments(self) -> int:
        return int(self.transfers.shape[0])

    def shifted_inverse(self, sigma: complex) -> Tuple[ComplexArray, ComplexArray]:
        """Eigenpairs ``nu = 1 / (mu - sigma)`` of the cyclic pencil."""
        return _shifted_inverse(self.transfers, sigma)

    def dispersion(self, gamma: float, normalized: bool = True) -> complex:
        """``det(Pi - e^{i gamma})``, optionally divided by ``prod sqrt(1 + |mu|^2)``."""
        z = np.exp(1j * gamma)
        nu, _ = self.shifted_inverse(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            if normalized:
                mag = np.sqrt(np.abs(nu) ** 2 + np.abs(1.0 + z * nu) ** 2)
                phase = np.where(nu == 0.0, 1.0, np.abs(nu) / np.where(nu == 0.0, 1.0, nu))
                factors = phase / mag
                factors = np.where(nu == 0.0, 1.0, factors)
            else:
                factors = 1.0 / nu
        return complex(np.prod(factors))


def _pencil(transfers: ComplexArray, sigma: complex) -> sparse.csc_matrix:
    k, n2, _ = transfers.shape
    eye = sparse.identity(n2, dtype=complex, format="csc")
    if k == 1:
        return sparse.csc_matrix(transfers[0] - sigma * np.eye(n2))
    blocks: List[List[Optional[sparse.csc_matrix]]] = [[None] * k for _ in range(k)]
    for j in range(k):
        blocks[j][j] = sparse.csc_matrix(transfers[j])
        if j + 1 < k:
            blocks[j][j + 1] = -eye
    blocks[k - 1][0] = -sigma * eye
    return sparse.bmat(blocks, format="csc", dtype=complex)


def _shifted_inverse(
    transfers: ComplexArray, sigma: complex
) -> Tuple[ComplexArray, ComplexArray]:
    # nonzero eigenvalues of (A - sigma B)^-1 B live in the leading block column
    k, n2, _ = transfers.shape
    pencil = _pencil(transfers, sigma)
    rhs = np.zeros((k * n2, n2), dtype=complex)
    rhs[(k - 1) * n2 :] = np.eye(n2)
    try:
        x = sparse_linalg.splu(pencil).solve(rhs)
    except RuntimeError:
        x = np.linalg.lstsq(pencil.toarray(), rhs, rcond=None)[0]
    nu, vecs = linalg.eig(x[:n2])
    return np.asarray(nu, dtype=complex), np.asarray(vecs, dtype=complex)


def _multipliers(
    transfers: ComplexArray, sigma: complex = 1.0
) -> Tuple[ComplexArray, ComplexArray]:
    nu, vecs = _shifted_inverse(transfers, sigma)
    with np.errstate(divide="ignore"):
        mu = np.where(nu == 0.0, np.inf, sigma + 1.0 / np.where(nu == 0.0, 1.0, nu))
    return np.asarray(mu, dtype=complex), vecs


def _segment_count(wave: FourierWave, lam: complex) -> int:
    n = wave.n_species
    vals = wave.first_order(wave.coeffs.x)
    a = vals[: 4 * n * n].T.reshape(-1, 2 * n, 2 * n).astype(complex)
    a[:, n:, :n] += lam * vals[4 * n * n :].T.reshape(-1, n, n)
    rate = float(np.max(np.abs(np.linalg.eigvals(a))))
    return int(np.clip(np.ceil(rate * wave.L / SEGMENT_GROWTH), 1, MAX_SEGMENTS))


def _transfers(
    fw: FourierWave, lam: complex, k: int, origin: float, rtol: float, atol: float
) -> ComplexArray:
    n = fw.n_species
    n2 = 2 * n
    h = fw.L / k
    starts = origin + h * np.arange(k)
    interp = fw.first_order
    base = interp.basis(starts)
    shift = interp.modes

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        vals = interp(starts, base * np.exp(1j * shift * s)[:, np.newaxis])
        a = vals[: n2 * n2].T.reshape(k, n2, n2).astype(complex)
        a[:, n:, :n] += lam * vals[n2 * n2 :].T.reshape(k, n, n)
        return np.einsum("kij,kjl->kil", a, y.reshape(k, n2, n2)).ravel()

    y0 = np.broadcast_to(np.eye(n2, dtype=complex), (k, n2, n2)).ravel()
    try:
        out = integrate_ivp(rhs, (0.0, h), y0, rtol=rtol, atol=atol)
    except StiffnessError as e:
        raise StiffnessError(
            f"monodromy at lambda={lam:.6g} failed: {e}; use a smaller |lambda| "
            "or the Bloch-matrix method"
        ) from e
    return np.asarray(out.y_end.reshape(k, n2, n2), dtype=complex)


def monodromy(
    wave: WaveLike,
    lam: complex,
    *,
    origin: float = 0.0,
    segments: Optional[int] = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    abel_tol: float = ABEL_TOL,
    max_refinements: int = 2,
) -> MonodromyResult:
    """Integrate ``w' = A(x, lambda) w`` over one period from the unit vectors.

    The period is cut into segments integrated together as one stacked IVP;
    their transfer matrices are multiplied with renormalization and kept for
    the cyclic pencil. A result whose log-determinant misses the Abel value
    by more than ``abel_tol`` is recomputed with twice the segments and
    tighter tolerances; :class:`NumericalError` is raised when that fails.
    """
    fw = _as_wave(wave)
    k = segments or _segment_count(fw, lam)
    predicted = fw.trace_integral()
    for attempt in range(max_refinements + 1):
        transfers = _transfers(fw, lam, k, origin, rtol, atol)
        pi = np.eye(transfers.shape[1], dtype=complex)
        log_scale = 0.0
        log_det = 0.0
        for t in transfers:
            pi = t @ pi
            s = float(np.linalg.norm(pi))
            pi /= s
            log_scale += np.log(s)
            log_det += float(np.linalg.slogdet(t)[1])
        residual = abs(log_det - predicted)
        if residual <= abel_tol:
            break
        logger.warning(
            f"monodromy at lambda={lam:.6g}: Abel residual {residual:.2e} "
            f"on {k} segments (attempt {attempt + 1})"
        )
        k = min(2 * k, MAX_SEGMENTS)
        rtol, atol = max(rtol / 100.0, 1e-13), max(atol / 100.0, 1e-15)
    else:
        raise NumericalError(
            f"monodromy at lambda={lam:.6g} fails the Abel check: "
            f"log det {log_det:.10g} against {predicted:.10g}"
        )
    mu, vecs = _multipliers(transfers)
    return MonodromyResult(
        complex(lam), pi, log_scale, mu, vecs, transfers, predicted, log_det, origin
    )


def wavetrain_dispersion(
    wave: WaveLike,
    lam: complex,
    gamma: float,
    *,
    normalized: bool = True,
    segments: Optional[int] = None,
) -> complex:
    """Dispersion function of a wavetrain.

    With ``normalized=False`` this is ``det(Pi(lambda) - e^{i gamma})``. The
    default divides every factor ``mu - e^{i gamma}`` by ``sqrt(1 + |mu|^2)``,
    which keeps the value bounded for large multipliers and has the same zeros.
    """
    return monodromy(wave, lam, segments=segments).dispersion(gamma, normalized)


def bloch_operator(wave: FourierWave, gamma: float) -> ComplexArray:
    """Fourier discretization of the Bloch operator at ``kappa = gamma / L``."""
    shift = gamma / wave.L
    d1 = differentiation_matrix(wave.n_grid, wave.L, shift=shift, complex_modes=True)
    d2 = differentiation_matrix(wave.n_grid, wave.L, shift=shift, order=2, complex_modes=True)
    c = wave.coeffs
    return np.asarray(_operator(c.alpha, c.beta, c.gamma, d1, d2), dtype=complex)


@dataclass
class BlochPoint:
    gamma: float
    kappa: float
    lam: complex
    eigenfunction: Optional[ComplexArray] = None
    method: str = "bloch_matrix"


def bloch_eigen(
    wave: WaveLike, gamma: float, n_modes: int = N_MODES, vectors: bool = False
) -> List[BlochPoint]:
    """The ``n_modes`` Bloch eigenvalues of largest real part at one ``gamma``."""
    fw = _as_wave(wave)
    op = bloch_operator(fw, gamma)
    if vectors:
        vals, vecs = linalg.eig(op)
    else:
        vals, vecs = linalg.eigvals(op), None
    order = np.argsort(-vals.real, kind="stable")[:n_modes]
    kappa = gamma / fw.L
    return [
        BlochPoint(
            gamma,
            kappa,
            complex(vals[j]),
            None if vecs is None else vecs[:, j].reshape(fw.n_species, fw.n_grid),
        )
        for j in order
    ]


@dataclass
class BlochSpectrum:
    gamma: FloatArray
    values: ComplexArray
    curves: List[SpectralCurve]
    gaps: List[float]
    L: float

    @property
    def kappa(self) -> FloatArray:
        return self.gamma / self.L

    def origin_curve(self) -> SpectralCurve:
        """The matched curve passing closest to ``lambda = 0`` at ``gamma = 0``."""
        starts = [c for c in self.curves if c.gamma is not None and c.gamma[0] == 0.0]
        if not starts:
            raise CurveTrackingError("no Bloch curve starts at gamma = 0")
        return min(starts, key=lambda c: abs(c.lam[0]))

    def max_re_lambda(self, exclude_origin: float = 1e-6) -> float:
        vals = self.values[np.isfinite(self.values)]
        vals = vals[np.abs(vals) > exclude_origin]
        return float(np.max(vals.real)) if vals.size else -np.inf


def bloch_matrix_spectrum(
    wave: WaveLike,
    gammas: Optional[Sequence[float]] = None,
    n_modes: int = N_MODES,
    *,
    jump_tol: float = CURVE_JUMP_TOL,
) -> BlochSpectrum:
    """Top ``n_modes`` Bloch eigenvalues on a ``gamma`` grid, matched into curves."""
    fw = _as_wave(wave)
    grid = default_gammas() if gammas is None else np.asarray(gammas, dtype=float)

    def solve(g: float) -> Optional[ComplexArray]:
        try:
            return np.array([p.lam for p in bloch_eigen(fw, g, n_modes)])
        except (linalg.LinAlgError, ValueError) as e:
            logger.warning(f"Bloch eigensolve failed at gamma={g:.6g}: {e}")
            return None

    with ThreadPoolExecutor(max_workers=WaveSpec.get_threads()) as pool:
        rows = list(pool.map(solve, grid))
    gaps = [float(g) for g, r in zip(grid, rows) if r is None]
    keep = [i for i, r in enumerate(rows) if r is not None]
    values = np.full((grid.size, n_modes), np.nan + 0j)
    for i in keep:
        row = rows[i]
        assert row is not None  # noqa: S101  # assertion is a type guard
        values[i, : row.size] = row
    kept = grid[keep]
    curves = match_branches(
        kept, values[keep], jump_tol=jump_tol, method="bloch_matrix", reference=fw.L
    )
    for c in curves:
        c.gamma = c.kappa
        c.kappa = c.kappa / fw.L
    return BlochSpectrum(grid, values, curves, gaps, fw.L)


def translation_mode(wave: WaveLike) -> Tuple[complex, float]:
    """Bloch eigenvalue closest to 0 at ``gamma = 0`` and its alignment with ``u_x``."""
    fw = _as_wave(wave)
    points = bloch_eigen(fw, 0.0, n_modes=fw.n_species * fw.n_grid, vectors=True)
    best = min(points, key=lambda p: abs(p.lam))
    phi = best.eigenfunction
    assert phi is not None  # noqa: S101  # assertion is a type guard
    ux = fw.profile.ux
    overlap = abs(np.vdot(ux.ravel(), phi.ravel()))
    return best.lam, float(overlap / (np.linalg.norm(phi) * np.linalg.norm(ux)))


def _root(
    f: Callable[[complex], complex], lam0: complex, tol: float, max_iter: int = 30
) -> complex:
    lam = complex(lam0)
    for _ in range(max_iter):
        val = f(lam)
        h = 1e-7 * max(1.0, abs(lam))
        slope = (f(lam + h) - val) / h
        if slope == 0.0 or not np.isfinite(slope):
            raise NumericalError(f"flat dispersion function at lambda={lam:.6g}")
        delta = val / slope
        lam -= delta
        if abs(delta) <= tol * max(1.0, abs(lam)):
            return lam
    raise NumericalError(f"dispersion Newton did not converge near lambda={lam0:.6g}")


DispersionFn = Callable[[complex, float], complex]


def _arclength_tail(
    d: DispersionFn,
    gamma0: float,
    lam0: complex,
    gamma_range: Tuple[float, float],
    h: float,
    tol: float,
    max_steps: int,
) -> Tuple[FloatArray, ComplexArray]:
    """Continue ``d = 0`` in ``(Re lambda, Im lambda, gamma)`` from a converged point."""

    def residual(z: FloatArray) -> FloatArray:
        val = d(complex(z[0], z[1]), float(z[2]))
        return np.array([val.real, val.imag])

    branch = arclength_continue(
        residual,
        np.array([lam0.real, lam0.imag, gamma0]),
        tangent=np.array([0.0, 0.0, 1.0]),
        step=StepControl(h0=0.5 * h, hmin=1e-6 * h, hmax=h, newton_tol=tol, max_steps=max_steps),
        p_index=2,
        p_range=gamma_range,
    )
    for e in branch.folds():
        logger.warning(f"spectral curve folds back at gamma={e.parameter:.6g}")
    pts = branch.points[1:]
    gammas = np.array([p.parameter for p in pts])
    lams = np.array([complex(p.state[0], p.state[1]) for p in pts])
    return gammas, lams


def trace_root_curve(
    d: DispersionFn,
    gammas: Sequence[float],
    lam0: complex = 0j,
    *,
    tol: float = 1e-10,
    jump_tol: float = CURVE_JUMP_TOL,
    max_halvings: int = 6,
) -> Tuple[FloatArray, ComplexArray]:
    """Follow the root ``lambda(gamma)`` of ``d(lambda, gamma) = 0`` over ``gammas``.

    Steps whose Newton solve fails are retried over halved ``gamma``
    increments. When halving runs out the rest of the curve is traced by
    pseudo-arclength continuation in ``(Re lambda, Im lambda, gamma)``, which
    follows the curve through folds in ``gamma``; the returned samples then
    no longer increase monotonically.
    """
    grid = np.asarray(gammas, dtype=float)
    lam = np.zeros(grid.size, dtype=complex)
    lam[0] = lam0
    for j in range(1, grid.size):
        g0, g1 = grid[j - 1], grid[j]
        lam_prev = lam[j - 1]
        slope = (lam[j - 1] - lam[j - 2]) / (g0 - grid[j - 2]) if j >= 2 else 0.0
        sub = 1
        while True:
            try:
                cur, g = lam_prev, g0
                for i in range(1, sub + 1):
                    g_next = g0 + (g1 - g0) * i / sub

                    def at(z: complex, g_at: float = g_next) -> complex:
                        return d(z, g_at)

                    cur = _root(at, cur + slope * (g_next - g), tol)
                    g = g_next
                break
            except (NumericalError, StiffnessError) as e:
                sub *= 2
                if sub <= 2**max_halvings:
                    logger.warning(f"spectral curve: refining step at gamma={g1:.6g} into {sub}")
                    continue
                logger.warning(
                    f"spectral curve: lost the root at gamma={g1:.6g} ({e}); "
                    "switching to arclength continuation"
                )
                span = (float(min(grid[0], grid[-1])), float(max(grid[0], grid[-1])))
                tail_g, tail_lam = _arclength_tail(
                    d, float(g0), complex(lam_prev), span, float(g1 - g0), tol, 8 * grid.size + 50
                )
                if tail_g.size == 0:
                    raise CurveTrackingError(
                        f"lost the spectral curve at gamma={g1:.6g} ({e}); use denser gamma steps"
                    ) from e
                return (
                    np.concatenate([grid[:j], tail_g]),
                    np.concatenate([lam[:j], tail_lam]),
                )
        if abs(cur - lam_prev) > jump_tol * (1.0 + abs(lam_prev)):
            raise CurveTrackingError(
                f"spectral curve jumped by {abs(cur - lam_prev):.3g} at gamma={g1:.6g}; "
                "use denser gamma steps"
            )
        lam[j] = cur
        logger.debug(f"spectral curve: gamma={g1:.6g} lambda={cur:.10g}")
    return grid, lam


def trace_origin_curve(
    wave: WaveLike,
    gammas: Optional[Sequence[float]] = None,
    *,
    tol: float = 1e-10,
    jump_tol: float = CURVE_JUMP_TOL,
    max_halvings: int = 6,
) -> SpectralCurve:
    """Continue the root of ``d(lambda, gamma) = 0`` from ``(0, 0)`` along ``gammas``.

    ``lambda(0) = 0`` holds by construction. See :func:`trace_root_curve`.
    """
    fw = _as_wave(wave)
    grid = np.linspace(0.0, np.pi, 33) if gammas is None else np.asarray(gammas, dtype=float)
    if grid.size == 0 or grid[0] != 0.0:
        raise ValueError("the gamma grid must start at 0")

    segments = 2 * _segment_count(fw, 0j)

    def d(lam: complex, g: float) -> complex:
        return wavetrain_dispersion(fw, lam, g, segments=segments)

    g, lam = trace_root_curve(
        d, grid, tol=tol, jump_tol=jump_tol, max_halvings=max_halvings
    )
    return SpectralCurve("monodromy", 0, g / fw.L, lam, reference=fw.L, gamma=g)


def sideband_curvature(
    curve: SpectralCurve, L: Optional[float] = None, kappa_fit: Optional[float] = None
) -> float:
    """Second derivative of ``Re lambda`` in ``kappa`` at the origin.

    The curve is completed by conjugation and ``Re lambda`` is fitted by a
    quartic polynomial on ``|kappa| <= kappa_fit`` (default ``0.5 / L``).
    """
    period = L if L is not None else curve.reference
    if kappa_fit is None:
        if period is None:
            raise ValueError("sideband_curvature needs L or kappa_fit")
        kappa_fit = 0.5 / float(period)
    full = curve.mirrored()
    sel = np.abs(full.kappa) <= kappa_fit * (1.0 + 1e-12)
    kappa, re = full.kappa[sel], full.lam[sel].real
    if kappa.size < 5 or np.sum(kappa > 0) < 2:
        raise UnreliableFitError(
            f"only {kappa.size} samples with |kappa| <= {kappa_fit:.4g}; densify the curve",
            coefficient=float("nan"),
            residual=float("nan"),
        )
    degree = min(4, kappa.size - 1)
    coeffs, *_ = np.linalg.lstsq(np.vander(kappa, degree + 1, increasing=True), re, rcond=None)
    fit = np.polyval(coeffs[::-1], kappa)
    rms = float(np.sqrt(np.mean((re - fit) ** 2)))
    lead = max(abs(coeffs[k]) * kappa_fit**k for k in range(1, degree + 1))
    curvature = 2.0 * float(coeffs[2])
    if lead > 0.0 and rms > 0.1 * lead:
        raise UnreliableFitError(
            f"curvature fit residual {rms:.3g} exceeds 10% of the leading term",
            coefficient=curvature,
            residual=rms / lead,
        )
    return curvature


def sideband_gammas(L: float, kappa_fit: Optional[float] = None, n: int = 9) -> FloatArray:
    """Gamma grid covering the sideband fit window."""
    kf = 0.5 / L if kappa_fit is None else kappa_fit
    return np.linspace(0.0, kf * L, n)


def curvature_at(profile: WaveProfile, kappa_fit: Optional[float] = None) -> float:
    curve = trace_origin_curve(profile, sideband_gammas(profile.L, kappa_fit))
    return sideband_curvature(curve, profile.L, kappa_fit)


@dataclass
class SidebandResult:
    L_star: float
    table: List[Tuple[float, float]]
    iterations: int


def detect_sideband(
    source: Union[Branch, Callable[[float], float]],
    L_bracket: Tuple[float, float],
    *,
    tol: float = 1e-3,
    segment: int = 0,
    max_iter: int = 60,
) -> SidebandResult:
    """Wavelength where the sideband curvature changes sign (Illinois method).

    ``source`` is either a wavetrain branch, re-solved at every trial ``L``,
    or a callable ``L -> curvature``.
    """
    if isinstance(source, Branch):
        branch = source

        def curvature(L: float) -> float:
            return curvature_at(profile_at(branch, L, segment))

    else:
        curvature = source
    lo, hi = float(L_bracket[0]), float(L_bracket[1])
    if not lo < hi:
        raise ValueError("L bracket must be ordered")
    f_lo, f_hi = curvature(lo), curvature(hi)
    table = [(lo, f_lo), (hi, f_hi)]
    if f_lo == 0.0:
        return SidebandResult(lo, table, 0)
    if f_hi == 0.0:
        return SidebandResult(hi, table, 0)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"sideband curvature has one sign on [{lo:g}, {hi:g}]", values=[f_lo, f_hi]
        )
    side = 0
    mid = 0.5 * (lo + hi)
    for it in range(1, max_iter + 1):
        mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        f_mid = curvature(mid)
        table.append((mid, f_mid))
        logger.info(f"sideband: L={mid:.8g} curvature={f_mid:.4g}")
        if f_mid == 0.0:
            return SidebandResult(mid, table, it)
        if np.sign(f_mid) == np.sign(f_hi):
            hi, f_hi = mid, f_mid
            if side == 1:
                f_lo *= 0.5
            side = 1
        else:
            lo, f_lo = mid, f_mid
            if side == -1:
                f_hi *= 0.5
            side = -1
        if hi - lo <= 2.0 * tol or abs(table[-1][0] - table[-2][0]) <= tol:
            break
    return SidebandResult(mid, sorted(table), it)
