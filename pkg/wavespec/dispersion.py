"""Essential spectra of homogeneous states from the dispersion relation.

Perturbations ``e^{i kappa x}`` of a homogeneous state ``u*`` in the frame
moving with speed ``c`` grow with the eigenvalues of
``-a(u*) kappa^2 + i kappa (c I + d2 f) + d1 f``.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from wavespec import WaveSpec
from wavespec.equilibria import Equilibrium, gsk_equilibria
from wavespec.errors import BracketError
from wavespec.model import ModelSpec, make_gsk
from wavespec.numerics.linalg import eig_dense
from wavespec.types import ComplexArray, FloatArray

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

CURVE_JUMP_TOL = 0.1
KAPPA_MAX = 20.0
KAPPA_POINTS = 601

Family = Callable[[float], Tuple[ModelSpec, Equilibrium]]


@dataclass
class SpectralCurve:
    """A matched branch ``kappa_j -> lambda_j`` of spectrum."""

    method: str
    branch: int
    kappa: FloatArray
    lam: ComplexArray
    vectors: Optional[ComplexArray] = None
    reference: Any = None
    gamma: Optional[FloatArray] = None

    def __len__(self) -> int:
        return int(self.kappa.size)

    def mirrored(self) -> "SpectralCurve":
        """Complete a curve sampled on ``kappa >= 0`` by ``lambda(-kappa) = conj lambda(kappa)``."""
        keep = self.kappa > 0.0
        kappa = np.concatenate([-self.kappa[keep][::-1], self.kappa])
        lam = np.concatenate([np.conj(self.lam[keep][::-1]), self.lam])
        return replace(self, kappa=kappa, lam=lam, vectors=None, gamma=None)


@dataclass
class GrowthSummary:
    max_re_lambda: float
    kappa_star: float
    branch: int
    im_lambda: float


@dataclass
class OnsetResult:
    theta: float
    kappa: float
    im_lambda: float
    kind: str
    iterations: int
    bracket: Tuple[float, float]


def kappa_grid(kappa_max: float = KAPPA_MAX, n: int = KAPPA_POINTS) -> FloatArray:
    return np.linspace(0.0, kappa_max, n)


def _state(u: Union[Equilibrium, Sequence[float], FloatArray]) -> FloatArray:
    if isinstance(u, Equilibrium):
        return u.state
    return np.asarray(u, dtype=float)


def dispersion_matrix(
    m: ModelSpec,
    u: Union[Equilibrium, Sequence[float], FloatArray],
    c: float,
    kappa: float,
) -> ComplexArray:
    state = _state(u)
    zero = np.zeros_like(state)
    a = m.diffusion(state)
    d1, d2 = m.reaction_jacobians(state, zero)
    eye = np.eye(m.n_species)
    return np.asarray(
        -a * kappa**2 + 1j * kappa * (c * eye + d2) + d1, dtype=complex
    )


def match_branches(
    x: FloatArray,
    values: ComplexArray,
    vectors: Optional[ComplexArray] = None,
    *,
    jump_tol: float = CURVE_JUMP_TOL,
    method: str = "fourier",
    reference: Any = None,
) -> List[SpectralCurve]:
    """Connect per-sample eigenvalue sets into continuous curves.

    ``values`` has shape ``(K, N)``. Samples are matched to a linear
    prediction from the two previous samples by optimal assignment, with
    eigenvector overlap breaking near-ties. A matched jump larger than
    ``jump_tol * (1 + |lambda|)`` closes the curve and opens a new one.
    """
    xs = np.asarray(x, dtype=float)
    vals = np.asarray(values, dtype=complex)
    k_count, n = vals.shape
    if k_count == 0:
        return []
    first = np.argsort(-vals[0].real, kind="stable")
    tracks = [[int(i)] for i in first]
    starts = [0] * n
    pieces: List[Tuple[int, int, List[int]]] = []
    next_id = n
    ids = list(range(n))
    for j in range(1, k_count):
        prev = np.array([vals[j - 1, t[-1]] for t in tracks])
        pred = prev.copy()
        for r, t in enumerate(tracks):
            if len(t) >= 2:
                pred[r] = 2.0 * prev[r] - vals[j - 2, t[-2]]
        cost = np.abs(pred[:, np.newaxis] - vals[j][np.newaxis, :])
        if vectors is not None:
            vp = np.array([vectors[j - 1, :, t[-1]] for t in tracks])
            overlap = np.abs(np.conj(vp) @ vectors[j])
            norms = np.outer(
                np.linalg.norm(vp, axis=1), np.linalg.norm(vectors[j], axis=0)
            )
            cost = cost + 1e-8 * (1.0 - overlap / np.maximum(norms, 1e-300))
        rows, cols = optimize.linear_sum_assignment(cost)
        for r, col in zip(rows, cols):
            lam_prev = prev[r]
            if abs(vals[j, col] - lam_prev) > jump_tol * (1.0 + abs(lam_prev)):
                logger.warning(
                    f"curve split at x={xs[j]:.6g}: jump {abs(vals[j, col] - lam_prev):.3g}"
                )
                pieces.append((ids[r], starts[r], tracks[r]))
                ids[r] = next_id
                next_id += 1
                starts[r] = j
                tracks[r] = [int(col)]
            else:
                tracks[r].append(int(col))
    for r in range(n):
        pieces.append((ids[r], starts[r], tracks[r]))
    pieces.sort(key=lambda p: p[0])

    curves: List[SpectralCurve] = []
    for branch, start, track in pieces:
        idx = np.arange(start, start + len(track))
        lam = vals[idx, track]
        vecs = None if vectors is None else vectors[idx, :, track]
        curves.append(SpectralCurve(method, branch, xs[idx], lam, vecs, reference))
    return curves


def spectrum_homogeneous(
    m: ModelSpec,
    u: Union[Equilibrium, Sequence[float], FloatArray],
    c: float = 0.0,
    kappas: Optional[FloatArray] = None,
    *,
    jump_tol: float = CURVE_JUMP_TOL,
) -> List[SpectralCurve]:
    """Dispersion curves of a homogeneous state, one per species before splits."""
    grid = kappa_grid() if kappas is None else np.asarray(kappas, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        raise ValueError("kappa grid must be strictly increasing")
    state = _state(u)

    def solve(kappa: float) -> Tuple[ComplexArray, ComplexArray]:
        pairs = eig_dense(dispersion_matrix(m, state, c, kappa))
        return pairs.values, pairs.vectors

    with ThreadPoolExecutor(max_workers=WaveSpec.get_threads()) as pool:
        results = list(pool.map(solve, grid))
    values = np.array([r[0] for r in results])
    vectors = np.array([r[1] for r in results])
    return match_branches(
        grid, values, vectors, jump_tol=jump_tol, method="fourier", reference=u
    )


def _vertex(x: FloatArray, y: FloatArray) -> Tuple[float, float]:
    coeffs = np.polyfit(x - x[1], y, 2)
    if coeffs[0] >= 0.0:
        return float(x[1]), float(y[1])
    xv = -coeffs[1] / (2.0 * coeffs[0])
    if not x[0] - x[1] <= xv <= x[2] - x[1]:
        return float(x[1]), float(y[1])
    return float(x[1] + xv), float(np.polyval(coeffs, xv))


def max_growth(curves: Sequence[SpectralCurve]) -> GrowthSummary:
    """Largest real part over all samples, refined by a local quadratic in kappa."""
    if not curves:
        raise ValueError("max_growth needs at least one curve")
    best: Optional[Tuple[float, int, int]] = None
    for ci, curve in enumerate(curves):
        j = int(np.argmax(curve.lam.real))
        val = float(curve.lam.real[j])
        if best is None or val > best[0]:
            best = (val, ci, j)
    assert best is not None  # noqa: S101  # assertion is a type guard
    val, ci, j = best
    curve = curves[ci]
    k, re = curve.kappa, curve.lam.real
    kappa_star, refined = float(k[j]), val
    if 0 < j < k.size - 1:
        kappa_star, refined = _vertex(k[j - 1 : j + 2], re[j - 1 : j + 2])
    elif j == 0 and k.size > 1 and k[0] == 0.0:
        # real parts are even in kappa
        kappa_star, refined = _vertex(
            np.array([-k[1], 0.0, k[1]]), np.array([re[1], re[0], re[1]])
        )
    im = float(np.interp(kappa_star, k, curve.lam.imag)) if k.size > 1 else float(curve.lam.imag[0])
    return GrowthSummary(max(refined, val), kappa_star, curve.branch, im)


def summarize_equilibrium(
    m: ModelSpec, eq: Equilibrium, c: float = 0.0, kappas: Optional[FloatArray] = None
) -> Equilibrium:
    """Fill the spectral summary fields of ``eq`` in place."""
    growth = max_growth(spectrum_homogeneous(m, eq, c, kappas))
    eq.max_re_lambda = growth.max_re_lambda
    eq.kappa_star = growth.kappa_star
    return eq


def detect_turing_hopf(
    family: Family,
    interval: Tuple[float, float],
    c: float = 0.0,
    kappas: Optional[FloatArray] = None,
    tol: float = 1e-4,
) -> OnsetResult:
    """Bisection on ``theta -> max Re lambda`` for the stability boundary."""
    grid = kappa_grid() if kappas is None else np.asarray(kappas, dtype=float)
    spacing = float(grid[1] - grid[0]) if grid.size > 1 else 0.0

    def growth(theta: float) -> GrowthSummary:
        m, eq = family(theta)
        return max_growth(spectrum_homogeneous(m, eq, c, grid))

    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("interval must be ordered")
    g_lo, g_hi = growth(lo), growth(hi)
    if np.sign(g_lo.max_re_lambda) == np.sign(g_hi.max_re_lambda):
        raise BracketError(
            f"max Re lambda has the same sign at theta={lo:g} and theta={hi:g}",
            values=[g_lo.max_re_lambda, g_hi.max_re_lambda],
        )
    sign_lo = np.sign(g_lo.max_re_lambda)
    iterations = 0
    g_mid = g_lo
    mid = lo
    while hi - lo > tol:
        iterations += 1
        mid = 0.5 * (lo + hi)
        g_mid = growth(mid)
        logger.info(f"onset bracket [{lo:.6g}, {hi:.6g}]: max Re lambda({mid:.6g}) = {g_mid.max_re_lambda:.3e}")
        if g_mid.max_re_lambda == 0.0:
            lo = hi = mid
            break
        if np.sign(g_mid.max_re_lambda) == sign_lo:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    if theta != mid:
        g_mid = growth(theta)
    kind = "turing_hopf" if abs(g_mid.kappa_star) > spacing else "hopf_or_steady"
    return OnsetResult(theta, abs(g_mid.kappa_star), g_mid.im_lambda, kind, iterations, (lo, hi))


def critical_parameter(
    family: Family,
    kappa: float,
    bracket: Tuple[float, float],
    c: float = 0.0,
    tol: float = 1e-12,
) -> float:
    """Parameter value where the mode ``e^{i kappa x}`` is neutrally stable."""

    def growth(theta: float) -> float:
        m, eq = family(theta)
        return float(np.max(eig_dense(dispersion_matrix(m, eq, c, kappa)).values.real))

    g0, g1 = growth(bracket[0]), growth(bracket[1])
    if np.sign(g0) == np.sign(g1):
        raise BracketError(
            f"mode kappa={kappa:g} does not change stability on {bracket}",
            values=[g0, g1],
        )
    return float(optimize.brentq(growth, bracket[0], bracket[1], xtol=tol))


def gsk_family(B: float, C: float, D: float, label: str = "plus") -> Family:
    """``A -> (GSK model, labelled equilibrium)`` for scans in the rainfall parameter."""

    def build(A: float) -> Tuple[ModelSpec, Equilibrium]:
        m = make_gsk(A, B, C, D)
        for eq in gsk_equilibria(A, B):
            if eq.label == label:
                eq.params = dict(m.params)
                return m, eq
        raise ValueError(f"GSK state '{label}' does not exist at A={A:g}, B={B:g}")

    return build
