"""Method-of-lines integration of ``u_t = (a(u) u_x)_x + c u_x + f(u, u_x)``.

Fields live on a uniform periodic grid ``x_i = i h`` of ``[0, length)`` and are
stored species-first with shape ``(N, M)``. Flattened vectors and Jacobians
are species-major, entry ``(p, i)`` at ``p * M + i``.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from wavespec.bloch import WaveLike, bloch_eigen, prepare_wave
from wavespec.dispersion import dispersion_matrix
from wavespec.equilibria import Equilibrium
from wavespec.errors import (
    NoConvergenceError,
    ParabolicityError,
    PositivityError,
    SingularJacobianError,
    StiffFailureError,
)
from wavespec.model import ModelSpec
from wavespec.numerics.linalg import PeriodicInterpolant, eig_dense
from wavespec.numerics.newton import newton_solve
from wavespec.types import ComplexArray, FloatArray
from wavespec.wavetrain import TRIVIAL_AMPLITUDE, WaveProfile

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

SCHEMES = ("euler", "trbdf2")
TRBDF2_GAMMA = 2.0 - math.sqrt(2.0)
DT0 = 1e-3
NODES_PER_BLOCK = 512
BLOCK_LENGTH = 6.0
MAX_HALVINGS = 6
NEWTON_TOL = 1e-10
SLOW_NEWTON = 6


def default_nodes(length: float) -> int:
    """Grid size giving 512 points per block of length 6."""
    blocks = max(1, int(round(length / BLOCK_LENGTH)))
    return NODES_PER_BLOCK * blocks


def grid(length: float, n_nodes: int) -> FloatArray:
    if length <= 0.0 or n_nodes < 3:
        raise ValueError(f"need length > 0 and at least 3 nodes, got {length}, {n_nodes}")
    return np.arange(n_nodes) * (length / n_nodes)


def _check_domain(m: ModelSpec, u: FloatArray, h: float) -> None:
    inside = np.asarray(m.in_domain(u))
    if not np.all(inside):
        j = int(np.flatnonzero(~inside)[0])
        raise ParabolicityError(
            f"field leaves the parabolic region at x={j * h:.6g}",
            location=j * h,
            index=j,
            state=u[:, j].tolist(),
        )


def _central(u: FloatArray, h: float) -> FloatArray:
    return np.asarray((np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2.0 * h))


def semidiscrete_rhs(m: ModelSpec, c: float, u: FloatArray, h: float) -> FloatArray:
    """Conservative second-order discretization of the co-moving right-hand side.

    Face diffusion is ``a`` at the arithmetic mean of the neighbouring states.
    """
    u = np.asarray(u, dtype=float)
    _check_domain(m, u, h)
    up = np.roll(u, -1, axis=1)
    flux = np.einsum("ijx,jx->ix", m.diffusion(0.5 * (u + up)), (up - u) / h)
    ux = _central(u, h)
    div = (flux - np.roll(flux, 1, axis=1)) / h
    return np.asarray(div + c * ux + m.reaction(u, ux), dtype=float)


def semidiscrete_jacobian(
    m: ModelSpec, c: float, u: FloatArray, h: float
) -> sparse.csr_matrix:
    """Periodic block-tridiagonal Jacobian of :func:`semidiscrete_rhs`."""
    u = np.asarray(u, dtype=float)
    n, size = u.shape
    up = np.roll(u, -1, axis=1)
    face = 0.5 * (u + up)
    a = m.diffusion(face)
    g = 0.5 * np.einsum("prqx,rx->pqx", m.diffusion_jacobian(face), (up - u) / h)
    d1, d2 = m.reaction_jacobians(u, _central(u, h))
    eye = np.eye(n)[:, :, np.newaxis]
    g_prev, a_prev = np.roll(g, 1, axis=-1), np.roll(a, 1, axis=-1)
    lower = -(g_prev - a_prev / h) / h - (c * eye + d2) / (2.0 * h)
    diag = (g - a / h - g_prev - a_prev / h) / h + d1
    upper = (g + a / h) / h + (c * eye + d2) / (2.0 * h)

    idx = np.arange(size)
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    for offset, block in ((-1, lower), (0, diag), (1, upper)):
        for p in range(n):
            for q in range(n):
                rows.append(p * size + idx)
                cols.append(q * size + (idx + offset) % size)
                vals.append(block[p, q])
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * size, n * size),
    )


@dataclass
class SimState:
    """A field on the periodic grid together with its integration controls."""

    model: ModelSpec
    x: FloatArray
    u: FloatArray
    t: float = 0.0
    c: float = 0.0
    scheme: str = "euler"
    dt: float = DT0
    monitors: Dict[str, List[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.u.shape != (self.model.n_species, self.x.size):
            raise ValueError(f"field shape {self.u.shape} does not match the grid")

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def length(self) -> float:
        return self.h * self.x.size

    @property
    def min_w(self) -> float:
        return float(np.min(self.u[0]))

    def rhs(self, u: Optional[FloatArray] = None) -> FloatArray:
        return semidiscrete_rhs(self.model, self.c, self.u if u is None else u, self.h)


def _implicit_solve(
    state: SimState, b: FloatArray, theta_dt: float, guess: FloatArray
) -> Tuple[FloatArray, int]:
    """Solve ``v - b - theta_dt * rhs(v) = 0``."""
    m, c, h = state.model, state.c, state.h
    shape = b.shape
    eye = sparse.identity(b.size, format="csr")

    def residual(z: FloatArray) -> FloatArray:
        v = z.reshape(shape)
        return np.asarray((v - b - theta_dt * semidiscrete_rhs(m, c, v, h)).ravel())

    def jacobian(z: FloatArray) -> sparse.csr_matrix:
        return eye - theta_dt * semidiscrete_jacobian(m, c, z.reshape(shape), h)

    tol = NEWTON_TOL * max(1.0, float(np.max(np.abs(b))))
    result = newton_solve(residual, guess.ravel(), jacobian, tol=tol, max_iter=20)
    return result.x.reshape(shape), result.iterations


def _advance(state: SimState, dt: float) -> Tuple[FloatArray, int, float]:
    """One step of the state's scheme: new field, Newton iterations, error estimate."""
    u = state.u
    f0 = state.rhs()
    if state.scheme == "euler":
        v, its = _implicit_solve(state, u, dt, u + dt * f0)
        err = 0.5 * dt * float(np.max(np.abs(state.rhs(v) - f0)))
        return v, its, err
    g = TRBDF2_GAMMA
    ug, its1 = _implicit_solve(state, u + 0.5 * g * dt * f0, 0.5 * g * dt, u + g * dt * f0)
    b = (ug - (1.0 - g) ** 2 * u) / (g * (2.0 - g))
    # quadratic through u, f(u) at t and ug at t + g dt, extrapolated to t + dt
    curv = (ug - u - g * dt * f0) / (g * dt) ** 2
    predicted = u + dt * f0 + dt * dt * curv
    v, its2 = _implicit_solve(state, b, (1.0 - g) / (2.0 - g) * dt, predicted)
    err = float(np.max(np.abs(v - predicted)))
    return v, max(its1, its2), err


def _positivity_report(state: SimState, u: FloatArray, t: float) -> Dict[str, float]:
    j = int(np.argmin(u[0]))
    return {"t": t, "min_w": float(u[0, j]), "location": float(state.x[j])}


def _accept(state: SimState, u: FloatArray, dt: float, next_dt: float) -> SimState:
    if not state.model.domain_predicate(u):
        report = _positivity_report(state, u, state.t + dt)
        raise PositivityError(
            f"first species lost positivity at t={report['t']:.6g}, "
            f"x={report['location']:.6g} (min {report['min_w']:.3e})",
            report=report,
        )
    monitors = {k: list(v) for k, v in state.monitors.items()}
    monitors.setdefault("t", []).append(state.t + dt)
    monitors.setdefault("min_w", []).append(float(np.min(u[0])))
    return replace(state, u=u, t=state.t + dt, dt=next_dt, monitors=monitors)


def _domain_failure(state: SimState, dt: float, error: ParabolicityError) -> PositivityError:
    j = int(np.argmin(state.u[0])) if error.index is None else error.index
    report = {"t": state.t + dt, "min_w": float(np.min(state.u[0])), "location": float(state.x[j])}
    return PositivityError(
        f"trial steps keep leaving the domain near x={report['location']:.6g} "
        f"after t={state.t:.6g}",
        report=report,
    )


def step(state: SimState, dt: Optional[float] = None) -> SimState:
    """Advance by one implicit step, halving ``dt`` when Newton fails."""
    h = state.dt if dt is None else float(dt)
    if h <= 0.0:
        raise ValueError(f"dt must be positive, got {h}")
    last: Optional[Exception] = None
    for _ in range(MAX_HALVINGS + 1):
        try:
            u, _, _ = _advance(state, h)
        except (NoConvergenceError, SingularJacobianError, ParabolicityError) as e:
            logger.warning(f"implicit step failed at t={state.t:.6g} with dt={h:.3e}: {e}")
            last = e
            h *= 0.5
            continue
        return _accept(state, u, h, h)
    if isinstance(last, ParabolicityError):
        raise _domain_failure(state, 2.0 * h, last) from last
    raise StiffFailureError(
        f"Newton failed after {MAX_HALVINGS} step halvings at t={state.t:.6g} "
        f"(last dt {2.0 * h:.3e})"
    )


def integrate(
    state: SimState,
    T: float,
    *,
    rtol: float = 1e-6,
    atol: float = 1e-9,
    dt_max: float = 1.0,
    observer: Optional[Callable[[SimState], bool]] = None,
) -> SimState:
    """Adaptive integration up to time ``T``.

    The step size follows the local error estimate and Newton effort. An
    ``observer`` is called after every accepted step; returning ``True``
    stops the run early.
    """
    if T < state.t:
        raise ValueError(f"final time {T} lies before the current time {state.t}")
    order = 1 if state.scheme == "euler" else 2
    dt = min(state.dt, dt_max)
    failures = 0
    while state.t < T * (1.0 - 1e-14):
        dt = min(dt, T - state.t)
        try:
            u, its, err = _advance(state, dt)
        except (NoConvergenceError, SingularJacobianError, ParabolicityError) as e:
            failures += 1
            if failures > MAX_HALVINGS:
                if isinstance(e, ParabolicityError):
                    raise _domain_failure(state, dt, e) from e
                raise StiffFailureError(
                    f"Newton failed {failures} times in a row at t={state.t:.6g} "
                    f"(dt {dt:.3e}): {e}"
                ) from e
            logger.warning(f"halving dt to {0.5 * dt:.3e} at t={state.t:.6g}: {e}")
            dt *= 0.5
            continue
        scale = atol + rtol * float(np.max(np.abs(u)))
        ratio = err / scale
        factor = 0.9 * ratio ** (-1.0 / (order + 1)) if ratio > 0.0 else 5.0
        if ratio > 1.0:
            logger.debug(f"rejected step at t={state.t:.6g}: error ratio {ratio:.3g}")
            dt *= max(0.2, factor)
            continue
        failures = 0
        grow = min(5.0, factor)
        if its > SLOW_NEWTON:
            grow = min(grow, 0.5)
        state = _accept(state, u, dt, min(dt * grow, dt_max))
        dt = state.dt
        if observer is not None and observer(state):
            break
    return state


@dataclass
class DiscreteBase:
    """A steady state of the semidiscrete scheme in the co-moving frame."""

    kind: str
    x: FloatArray
    u: FloatArray
    c: float
    length: float
    residual: float = 0.0

    @property
    def h(self) -> float:
        return self.length / self.x.size

    @property
    def l2(self) -> float:
        return float(np.sqrt(self.h * np.sum(self.u * self.u)))


def _commensurate(length: float, period: float) -> int:
    periods = int(round(length / period))
    if periods < 1 or abs(periods * period - length) > 1e-8 * length:
        raise ValueError(
            f"domain length {length:.10g} is not a multiple of the period {period:.10g}"
        )
    return periods


def relax_base(
    m: ModelSpec,
    profile: WaveProfile,
    n_nodes: int,
    periods: int = 1,
    *,
    tol: float = 1e-10,
) -> DiscreteBase:
    """Discrete travelling wave on ``periods`` copies of one period.

    One period is relaxed with ``n_nodes // periods`` points (speed free, phase
    pinned to the interpolated profile) and then tiled.
    """
    if n_nodes % periods:
        raise ValueError(f"{n_nodes} nodes do not split into {periods} periods")
    n = m.n_species
    per = n_nodes // periods
    x1 = grid(profile.L, per)
    h = profile.L / per
    sampled = profile.mesh(x1)
    ref, ref_x = sampled[:n], sampled[n:]
    shape = ref.shape

    def residual(z: FloatArray) -> FloatArray:
        u = z[:-1].reshape(shape)
        phase = h * float(np.sum((u - ref) * ref_x))
        return np.append(semidiscrete_rhs(m, float(z[-1]), u, h).ravel(), phase)

    def jacobian(z: FloatArray) -> sparse.csr_matrix:
        u = z[:-1].reshape(shape)
        col = sparse.csr_matrix(_central(u, h).reshape(-1, 1))
        row = sparse.csr_matrix(h * ref_x.reshape(1, -1))
        jac = semidiscrete_jacobian(m, float(z[-1]), u, h)
        return sparse.bmat([[jac, col], [row, None]], format="csr")

    z0 = np.append(ref.ravel(), profile.c)
    result = newton_solve(residual, z0, jacobian, tol=tol, max_iter=30)
    u = np.tile(result.x[:-1].reshape(shape), (1, periods))
    c = float(result.x[-1])
    logger.info(
        f"relaxed discrete wave on {per} points per period: c={c:.10g} "
        f"(continuum {profile.c:.10g}), {result.iterations} Newton iterations"
    )
    return DiscreteBase(
        "wavetrain", grid(periods * profile.L, n_nodes), u, c, periods * profile.L, result.residual
    )


def discretize(
    m: ModelSpec,
    base: Union[Equilibrium, WaveProfile, DiscreteBase],
    length: float,
    n_nodes: Optional[int] = None,
    *,
    c: float = 0.0,
) -> DiscreteBase:
    """Base state on a periodic grid of ``[0, length)``."""
    if isinstance(base, DiscreteBase):
        return base
    nodes = default_nodes(length) if n_nodes is None else n_nodes
    x = grid(length, nodes)
    if isinstance(base, Equilibrium):
        u = np.repeat(base.state[:, np.newaxis], nodes, axis=1)
        return DiscreteBase("homogeneous", x, u, c, length)
    if base.trivial or base.kind == "homogeneous" or base.amplitude < TRIVIAL_AMPLITUDE:
        u = np.repeat(base.u[:, :1], nodes, axis=1)
        return DiscreteBase("homogeneous", x, u, base.c, length)
    return relax_base(m, base, nodes, _commensurate(length, base.L))


def orbital_distance(u: FloatArray, base: FloatArray, h: float) -> Tuple[float, float]:
    """L2 distance from ``u`` to the nearest translate of ``base``, and the shift.

    Discrete translates come from an FFT cross-correlation; the minimum is
    refined by a parabola through the three neighbouring shifts.
    """
    u = np.atleast_2d(u)
    base = np.atleast_2d(base)
    size = u.shape[1]
    corr = np.sum(np.fft.ifft(np.fft.fft(u, axis=1) * np.conj(np.fft.fft(base, axis=1)), axis=1).real, axis=0)
    k = int(np.argmax(corr))

    def dist2(shift: int) -> float:
        return h * float(np.sum((u - np.roll(base, shift % size, axis=1)) ** 2))

    d0, dm, dp = dist2(k), dist2(k - 1), dist2(k + 1)
    curvature = dp - 2.0 * d0 + dm
    if curvature > 0.0:
        offset = 0.5 * (dm - dp) / curvature
        best = d0 - 0.125 * (dp - dm) ** 2 / curvature
    else:
        offset, best = 0.0, d0
    shift = (k + offset) * h
    if shift > 0.5 * size * h:
        shift -= size * h
    return math.sqrt(max(best, 0.0)), shift


def fourier_mode(
    m: ModelSpec,
    state: Union[Equilibrium, FloatArray],
    kappa: float,
    x: FloatArray,
    length: float,
    c: float = 0.0,
) -> Tuple[FloatArray, complex]:
    """Real part of the most unstable Fourier mode ``v e^{i kappa x}`` on the grid."""
    if kappa != 0.0:
        _commensurate(length, 2.0 * np.pi / abs(kappa))
    u = state.state if isinstance(state, Equilibrium) else np.asarray(state, dtype=float)
    pairs = eig_dense(dispersion_matrix(m, u, c, kappa))
    j = int(np.argmax(pairs.values.real))
    v = pairs.vectors[:, j]
    mode = (v[:, np.newaxis] * np.exp(1j * kappa * x)[np.newaxis]).real
    return np.asarray(mode, dtype=float), complex(pairs.values[j])


def bloch_mode(
    wave: WaveLike, gamma: float, x: FloatArray, length: float
) -> Tuple[FloatArray, complex]:
    """Real part of the leading Bloch eigenfunction ``p(x) e^{i gamma x / L}``."""
    fw = prepare_wave(wave) if isinstance(wave, WaveProfile) else wave
    periods = _commensurate(length, fw.L)
    turns = gamma * periods / (2.0 * np.pi)
    if abs(turns - round(turns)) > 1e-8:
        raise ValueError(
            f"gamma={gamma:.10g} is not periodic on {periods} periods "
            "(gamma * periods / 2 pi must be an integer)"
        )
    point = bloch_eigen(fw, gamma, n_modes=1, vectors=True)[0]
    phi = point.eigenfunction
    assert phi is not None  # noqa: S101  # assertion is a type guard
    periodic = PeriodicInterpolant(phi, fw.L, origin=float(fw.profile.x[0]))(x)
    mode: ComplexArray = periodic * np.exp(1j * point.kappa * x)[np.newaxis]
    return np.asarray(mode.real, dtype=float), point.lam


@dataclass
class GrowthResult:
    sigma: float
    success: bool
    t: FloatArray
    q: FloatArray
    min_w: FloatArray
    predicted: Optional[complex] = None
    note: str = ""
    window: Tuple[int, int] = (0, 0)
    snapshots: List[Tuple[float, FloatArray]] = field(default_factory=list)

    @property
    def relative_error(self) -> Optional[float]:
        if self.predicted is None or self.predicted.real == 0.0:
            return None
        return abs(self.sigma - self.predicted.real) / abs(self.predicted.real)

    @property
    def max_growth_factor(self) -> float:
        return float(np.max(self.q) / self.q[0]) if self.q.size and self.q[0] > 0 else math.inf


def _fit_window(q: FloatArray, lower: float, upper: float) -> Tuple[int, int]:
    above = np.flatnonzero(q >= lower)
    if above.size == 0:
        return 0, 0
    start = int(above[0])
    over = np.flatnonzero(q[start:] > upper)
    stop = start + int(over[0]) if over.size else q.size
    return start, stop


def growth_experiment(
    m: ModelSpec,
    base: Union[Equilibrium, WaveProfile, DiscreteBase],
    mode: FloatArray,
    *,
    length: Optional[float] = None,
    n_nodes: Optional[int] = None,
    epsilon: float = 1e-4,
    T: float = 200.0,
    c: float = 0.0,
    scheme: str = "trbdf2",
    dt0: float = DT0,
    rtol: float = 1e-6,
    atol: float = 1e-10,
    dt_max: float = 0.5,
    predicted: Optional[complex] = None,
    snapshot_every: Optional[float] = None,
) -> GrowthResult:
    """Grow ``epsilon * |u_bar|_inf * mode`` on top of a base state and fit its rate.

    ``q(t)`` is the translate-minimized L2 distance to the base. The rate is
    the slope of ``log q`` while ``2 q(0) <= q <= 0.1 |u_bar|_L2``. An empty
    window is reported through ``success=False``.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if isinstance(base, DiscreteBase):
        disc = base
    else:
        if length is None:
            raise ValueError("length is required unless a DiscreteBase is given")
        disc = discretize(m, base, length, n_nodes, c=c)
    mode = np.atleast_2d(np.asarray(mode, dtype=float))
    if mode.shape != disc.u.shape:
        raise ValueError(f"mode shape {mode.shape} does not match the grid {disc.u.shape}")
    peak = float(np.max(np.abs(mode)))
    if peak == 0.0:
        raise ValueError("mode vanishes on the grid")
    amplitude = epsilon * float(np.max(np.abs(disc.u)))
    state = SimState(m, disc.x, disc.u + amplitude * mode / peak, c=disc.c, scheme=scheme, dt=dt0)

    q0, _ = orbital_distance(state.u, disc.u, disc.h)
    upper = 0.1 * disc.l2
    times: List[float] = [0.0]
    dists: List[float] = [q0]
    mins: List[float] = [state.min_w]
    snapshots: List[Tuple[float, FloatArray]] = [(0.0, state.u.copy())]
    next_snap = snapshot_every

    def observe(s: SimState) -> bool:
        nonlocal next_snap
        q, _ = orbital_distance(s.u, disc.u, disc.h)
        times.append(s.t)
        dists.append(q)
        mins.append(s.min_w)
        if next_snap is not None and snapshot_every is not None and s.t >= next_snap:
            snapshots.append((s.t, s.u.copy()))
            next_snap += snapshot_every
        return q > 2.0 * upper

    integrate(state, T, rtol=rtol, atol=atol, dt_max=dt_max, observer=observe)
    t, q = np.array(times), np.array(dists)
    start, stop = _fit_window(q, 2.0 * q0, upper)
    if stop - start >= 3:
        sigma = float(np.polyfit(t[start:stop], np.log(q[start:stop]), 1)[0])
        success, note = True, ""
    else:
        positive = q > 0.0
        sigma = float(np.polyfit(t[positive], np.log(q[positive]), 1)[0]) if np.sum(positive) > 1 else 0.0
        success, note = False, "no growth window: q never doubled inside the linear regime"
    logger.info(
        f"growth experiment: sigma={sigma:.6g} over t in "
        f"[{t[start] if success else 0.0:.4g}, {t[stop - 1] if success else t[-1]:.4g}], "
        f"max q/q0={float(np.max(q)) / q0 if q0 > 0 else math.inf:.3g}"
    )
    return GrowthResult(
        sigma,
        success,
        t,
        q,
        np.array(mins),
        predicted,
        note,
        (start, stop),
        snapshots,
    )
