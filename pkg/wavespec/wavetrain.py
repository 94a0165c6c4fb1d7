"""Periodic travelling waves of ``u_t = (a(u) u_x)_x + f(u, u_x)``.

In the frame ``xi = x - c t`` a wave profile solves the first-order system

    u' = v,    a(u) v' = -(a'(u)[v]) v - c v - f(u, v),

and a wavetrain is an ``L``-periodic solution of it. Profiles are stored as a
mesh function of ``(u, u_x)`` on one period.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, sparse

from wavespec.dispersion import Family, critical_parameter, dispersion_matrix
from wavespec.equilibria import Equilibrium
from wavespec.errors import (
    NoConvergenceError,
    NumericalError,
    ParabolicityError,
)
from wavespec.model import ModelSpec
from wavespec.numerics.collocation import (
    MeshFunction,
    PeriodicCollocation,
    regrid,
    solve_periodic_bvp,
)
from wavespec.numerics.continuation import (
    Branch,
    BranchEvent,
    BranchPoint,
    StepControl,
    arclength_continue,
)
from wavespec.numerics.linalg import central_derivative, eig_dense, spectral_derivative
from wavespec.numerics.newton import newton_solve
from wavespec.types import FloatArray, SparseOrDense, VectorField

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

TRIVIAL_AMPLITUDE = 1e-8
DEFAULT_NODES = 128


@dataclass
class WaveProfile:
    """A travelling-wave profile ``(u, u_x)`` with speed ``c``.

    ``kind`` is one of ``wavetrain``, ``front``, ``pulse`` or ``homogeneous``.
    Wavetrain meshes are periodic with period ``L``; front and pulse meshes
    cover a finite window and are not periodic.
    """

    kind: str
    mesh: MeshFunction
    c: float
    params: Dict[str, float]
    model: Optional[ModelSpec] = None
    uxx: Optional[FloatArray] = None
    trivial: bool = False

    @property
    def n_species(self) -> int:
        return self.mesh.n_components // 2

    @property
    def x(self) -> FloatArray:
        return self.mesh.nodes

    @property
    def u(self) -> FloatArray:
        return self.mesh.values[: self.n_species]

    @property
    def ux(self) -> FloatArray:
        return self.mesh.values[self.n_species :]

    @property
    def L(self) -> float:
        return self.mesh.period

    @property
    def k(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def omega(self) -> float:
        return self.c * self.k

    @property
    def s_max_w(self) -> float:
        return float(np.max(self.u[0]))

    @property
    def s_l2(self) -> float:
        """Root mean square of the first species over the mesh window."""
        if self.mesh.periodic:
            x, y = self.mesh.closed()
            w = y[0]
        else:
            x, w = self.x, self.u[0]
        return float(np.sqrt(integrate.trapezoid(w * w, x) / (x[-1] - x[0])))

    @property
    def amplitude(self) -> float:
        return float(np.max(np.ptp(self.u, axis=1)))

    def with_derivatives(self) -> "WaveProfile":
        """Copy carrying ``u_xx`` samples.

        Uniform periodic meshes use Fourier differentiation, other periodic
        meshes the co-moving equation itself, and windows fourth-order
        central differences.
        """
        if self.mesh.periodic:
            h = np.diff(self.x)
            if np.allclose(h, self.L / self.x.size, rtol=1e-10, atol=0.0):
                uxx = spectral_derivative(self.ux, self.L)
            elif self.model is not None:
                uxx = comoving_rhs(self.model, self.c)(
                    self.x, self.mesh.values, np.empty(0)
                )[self.n_species :]
            else:
                uxx = np.asarray(self.mesh.spline().derivative()(self.x), dtype=float)[
                    self.n_species :
                ]
        else:
            uxx = central_derivative(self.ux, self.x)
        return replace(self, uxx=np.asarray(uxx, dtype=float))

    def rescaled(self, L: float) -> "WaveProfile":
        return replace(self, mesh=self.mesh.rescaled(L), uxx=None)

    def resampled(self, nodes: FloatArray) -> "WaveProfile":
        return replace(self, mesh=self.mesh.resample(nodes), uxx=None)

    def uniform(self, n_nodes: int) -> "WaveProfile":
        return self.resampled(np.arange(n_nodes) * (self.L / n_nodes))


def _field(m: ModelSpec, x: FloatArray, y: FloatArray, c: float) -> FloatArray:
    n = m.n_species
    u, v = y[:n], y[n:]
    inside = np.asarray(m.in_domain(u))
    if not np.all(inside):
        j = int(np.flatnonzero(~inside)[0])
        xs = np.atleast_1d(x)
        raise ParabolicityError(
            f"profile leaves the parabolic region at x={xs[j]:.6g}",
            location=float(xs[j]),
            index=j,
            state=u[:, j].tolist(),
        )
    a = np.moveaxis(m.diffusion(u), -1, 0)
    quad = np.einsum("ijkx,kx,jx->ix", m.diffusion_jacobian(u), v, v)
    rhs = -quad - c * v - m.reaction(u, v)
    try:
        vx = np.linalg.solve(a, rhs.T[..., np.newaxis])[..., 0].T
    except np.linalg.LinAlgError as e:
        raise ParabolicityError(f"diffusion matrix is singular along the profile: {e}") from e
    return np.concatenate([v, vx])


def comoving_rhs(m: ModelSpec, c: float) -> VectorField:
    """First-order co-moving field ``(u, v) -> (v, v')``.

    A non-empty ``theta`` overrides the speed with ``theta[0]``.
    """

    def rhs(x: FloatArray, y: FloatArray, theta: FloatArray) -> FloatArray:
        speed = float(theta[0]) if np.size(theta) else c
        return _field(m, x, np.asarray(y, dtype=float), speed)

    return rhs


class WavetrainSystem:
    """Collocation system for wavetrains with free speed.

    Unknowns are ``z = (Y, c)`` or ``z = (Y, c, p)`` where ``p`` is the
    wavelength (``parameter="L"``) or a named model parameter. An optional
    amplitude row pins ``int (u_0 - mean u_0)^2 d tau`` to a target value.
    """

    def __init__(
        self,
        model: ModelSpec,
        reference: WaveProfile,
        *,
        parameter: Optional[str] = None,
        amplitude: Optional[float] = None,
    ) -> None:
        self.model = model
        self.n = 2 * model.n_species
        self.period = reference.L
        self.parameter = parameter
        self.colloc = PeriodicCollocation(self._rhs, reference.mesh.tau, self.n)
        self.tau = self.colloc.tau
        self.w_tau = self.colloc.weights()
        self.nm = self.n * self.colloc.m
        self.row, self.offset = self.colloc.phase_row(reference.mesh)
        self.amplitude = amplitude

    @property
    def model_parameter(self) -> bool:
        return self.parameter is not None and self.parameter != "L"

    def model_at(self, p: float) -> ModelSpec:
        if not self.model_parameter:
            return self.model
        assert self.parameter is not None  # noqa: S101  # assertion is a type guard
        return self.model.with_params(**{self.parameter: p})

    def _rhs(self, x: FloatArray, y: FloatArray, theta: FloatArray) -> FloatArray:
        m = self.model_at(float(theta[1])) if self.model_parameter else self.model
        return _field(m, x, y, float(theta[0]))

    def split(self, z: FloatArray) -> Tuple[FloatArray, FloatArray, float]:
        y = self.colloc.unpack(z)
        free = z[self.nm :]
        if self.parameter == "L":
            return y, free[:1], float(free[1])
        return y, np.asarray(free, dtype=float), self.period

    def pack(self, profile: WaveProfile) -> FloatArray:
        z = [self.colloc.pack(profile.mesh.values), [profile.c]]
        if self.parameter == "L":
            z.append([profile.L])
        elif self.model_parameter:
            assert self.parameter is not None  # noqa: S101  # assertion is a type guard
            z.append([profile.params[self.parameter]])
        return np.concatenate(z)

    def amplitude_value(self, y: FloatArray) -> float:
        u0 = y[0]
        mean = float(np.sum(self.w_tau * u0))
        return float(np.sum(self.w_tau * (u0 - mean) ** 2))

    def residual(self, z: FloatArray) -> FloatArray:
        y, theta, period = self.split(z)
        parts = [
            self.colloc.residual(y, theta, period),
            [self.row @ z[: self.nm] - self.offset],
        ]
        if self.amplitude is not None:
            parts.append([self.amplitude_value(y) - self.amplitude])
        return np.concatenate(parts)

    def jacobian(self, z: FloatArray) -> SparseOrDense:
        y, theta, period = self.split(z)
        jy = self.colloc.jacobian(y, theta, period)
        cols = self.colloc.param_columns(
            y, theta, period, with_period=self.parameter == "L"
        )
        n_free = cols.shape[1]
        blocks: List[sparse.spmatrix] = [
            sparse.hstack([jy, sparse.csr_matrix(cols)]),
            sparse.csr_matrix(np.append(self.row, np.zeros(n_free))[np.newaxis]),
        ]
        if self.amplitude is not None:
            u0 = y[0]
            grad = np.zeros_like(y)
            grad[0] = 2.0 * self.w_tau * (u0 - float(np.sum(self.w_tau * u0)))
            row = np.append(self.colloc.pack(grad), np.zeros(n_free))
            blocks.append(sparse.csr_matrix(row[np.newaxis]))
        return sparse.vstack(blocks).tocsr()

    def weights(self) -> FloatArray:
        """Scaled product norm: ``int |y|^2 d tau`` plus the free scalars."""
        wy = self.colloc.pack(np.broadcast_to(self.w_tau, (self.n, self.tau.size)))
        n_free = 1 + (self.parameter is not None)
        return np.concatenate([wy, np.ones(n_free)])

    def profile(self, z: FloatArray) -> WaveProfile:
        y, theta, period = self.split(z)
        m = self.model_at(float(theta[1])) if self.model_parameter else self.model
        mesh = MeshFunction(self.tau * period, y, period)
        prof = WaveProfile("wavetrain", mesh, float(theta[0]), dict(m.params), m)
        prof.trivial = prof.amplitude <= TRIVIAL_AMPLITUDE
        return prof


def _equilibrium_profile(m: ModelSpec, L: float, guess: WaveProfile, tol: float) -> WaveProfile:
    zero = np.zeros(m.n_species)
    start = np.mean(guess.u, axis=1)
    res = newton_solve(
        lambda u: m.reaction(u, zero),
        start,
        lambda u: m.reaction_jacobians(u, zero)[0],
        tol=tol,
    )
    values = np.concatenate(
        [np.repeat(res.x[:, np.newaxis], guess.x.size, axis=1), np.zeros_like(guess.u)]
    )
    mesh = MeshFunction(guess.mesh.tau * L, values, L)
    prof = WaveProfile("wavetrain", mesh, guess.c, dict(m.params), m, trivial=True)
    return prof.with_derivatives()


def solve_wavetrain(
    m: ModelSpec,
    L: float,
    guess: WaveProfile,
    *,
    c_free: bool = True,
    reference: Optional[WaveProfile] = None,
    tol: float = 1e-9,
    max_iter: int = 40,
) -> WaveProfile:
    """Converge an ``L``-periodic wavetrain from a rough guess.

    With ``c_free`` the speed is solved together with the profile. A
    homogeneous guess returns the nearby equilibrium flagged ``trivial``.
    """
    if guess.amplitude <= TRIVIAL_AMPLITUDE:
        return _equilibrium_profile(m, L, guess, min(tol, 1e-10))
    rhs = comoving_rhs(m, guess.c)
    try:
        sol = solve_periodic_bvp(
            rhs,
            L,
            guess.mesh,
            mu=guess.c if c_free else None,
            theta=() if c_free else (guess.c,),
            reference=None if reference is None else reference.mesh,
            tol=tol,
            max_iter=max_iter,
        )
    except NoConvergenceError as e:
        raise NoConvergenceError(
            f"wavetrain solve at L={L:g} failed: {e}; continue the branch from "
            "the Turing-Hopf onset instead of starting cold",
            residual=e.residual,
            history=e.history,
        ) from e
    c = sol.mu if sol.mu is not None else guess.c
    prof = WaveProfile("wavetrain", sol.mesh, float(c), dict(m.params), m)
    if not m.domain_predicate(prof.u):
        j = int(np.flatnonzero(~np.asarray(m.in_domain(prof.u)))[0])
        raise ParabolicityError(
            f"converged wavetrain leaves the parabolic region at x={prof.x[j]:.6g}",
            location=float(prof.x[j]),
            index=j,
            state=prof.u[:, j].tolist(),
        )
    prof.trivial = prof.amplitude <= TRIVIAL_AMPLITUDE
    return prof.with_derivatives()


def _map_tangent(t: FloatArray, old: WaveProfile, new_tau: FloatArray, n: int) -> FloatArray:
    m = old.mesh.n_nodes
    ty = t[: n * m].reshape(m, n).T
    mapped = MeshFunction(old.mesh.nodes, ty, old.L).resample(new_tau * old.L).values
    return np.concatenate([mapped.T.ravel(), t[n * m :]])


def continue_branch(
    m: ModelSpec,
    start: WaveProfile,
    p_range: Tuple[float, float],
    *,
    parameter: str = "L",
    step: Optional[StepControl] = None,
    direction: int = 1,
    segment_steps: int = 25,
    max_segments: int = 400,
    defect_tol: float = 1e-6,
    max_nodes: int = 1024,
    stop: Optional[Callable[[BranchPoint], Optional[str]]] = None,
    fold_tol: float = 1e-6,
) -> Branch:
    """Pseudo-arclength branch of wavetrains in ``L`` or a model parameter.

    The branch is traced in segments; between segments the mesh is
    equidistributed and refined when the collocation defect exceeds
    ``defect_tol``. Every point carries its profile in ``data["profile"]``.
    """
    control = step or StepControl(h0=0.05, hmax=1.0, newton_tol=1e-9)
    if p_range[0] >= p_range[1]:
        raise ValueError("p_range must be ordered")
    model = start.model if start.model is not None else m
    profile = start
    tangent: Optional[FloatArray] = None
    h = control.h0
    branch: Optional[Branch] = None

    for seg in range(max_segments):
        system = WavetrainSystem(model, profile, parameter=parameter)
        z0 = system.pack(profile)
        if tangent is None:
            orient = np.zeros(z0.size)
            orient[-1] = float(direction)
        else:
            orient = tangent

        def on_accept(point: BranchPoint, system: WavetrainSystem = system) -> None:
            prof = system.profile(point.state)
            point.data["profile"] = prof
            point.data["c"] = prof.c
            point.measure = prof.s_max_w

        def check(point: BranchPoint) -> Optional[str]:
            prof = point.data["profile"]
            if not model.domain_predicate(prof.u):
                return "parabolicity loss"
            return stop(point) if stop is not None else None

        piece = arclength_continue(
            system.residual,
            z0,
            jacobian=system.jacobian,
            step=replace(control, h0=min(max(h, control.hmin), control.hmax), max_steps=segment_steps),
            tangent=orient,
            weights=system.weights(),
            stop=check,
            on_accept=on_accept,
            p_range=p_range,
            fold_tol=fold_tol,
        )
        for event in piece.events:
            event.data["profile"] = system.profile(event.state)
        if branch is None:
            branch = piece
        else:
            branch.extend(piece)
        logger.info(
            f"segment {seg}: {len(piece)} points, p={piece.points[-1].parameter:.6g}, "
            f"{piece.diagnostic}"
        )
        if piece.diagnostic != "step limit":
            break

        last = piece.points[-1]
        old = last.data["profile"]
        theta = np.array([old.c] + ([old.params[parameter]] if system.model_parameter else []))
        defect = _max_defect(system, last.state)
        n_nodes = old.mesh.n_nodes
        if defect > defect_tol and n_nodes < max_nodes:
            n_nodes = min(2 * n_nodes, max_nodes)
        new_mesh = regrid(old.mesh, system._rhs, theta, n_nodes)
        tangent = _map_tangent(last.tangent, old, new_mesh.tau, system.n)
        profile = replace(old, mesh=new_mesh, uxx=None)
        h = piece.step_history[-1] if piece.step_history else h

    assert branch is not None  # noqa: S101  # assertion is a type guard
    return branch


def _max_defect(system: WavetrainSystem, z: FloatArray) -> float:
    y, theta, period = system.split(z)
    return float(np.max(system.colloc.defect(y, theta, period)))


def continue_both(
    m: ModelSpec,
    start: WaveProfile,
    p_range: Tuple[float, float],
    **options: Any,
) -> Branch:
    """Continue in both directions from ``start`` and join at the start point."""
    back = continue_branch(m, start, p_range, direction=-1, **options)
    fwd = continue_branch(m, start, p_range, direction=1, **options)
    nb = len(back.points)
    total = back.points[-1].arclength
    points = list(reversed(back.points))
    for p in points:
        p.arclength = total - p.arclength
        p.tangent = -p.tangent
    for p in fwd.points[1:]:
        p.arclength += total
        points.append(p)
    events: List[BranchEvent] = []
    for e in back.events:
        e.index = nb - 2 - e.index
        events.append(e)
    for e in fwd.events:
        e.index += nb - 1
        events.append(e)
    events.sort(key=lambda e: e.index)
    return Branch(
        points=points,
        events=events,
        step_history=back.step_history[::-1] + fwd.step_history,
        diagnostic=f"back: {back.diagnostic}; forward: {fwd.diagnostic}",
        p_index=fwd.p_index,
    )


@dataclass
class FoldPoint:
    parameter: float
    profile: Optional[WaveProfile] = None
    measure: Optional[float] = None


def detect_fold(branch: Branch) -> List[FoldPoint]:
    """Folds of a branch in its continuation parameter.

    Tangent-sign events from the continuation are used when present;
    otherwise turning points of the sampled parameter sequence are located
    by a quadratic fit against the solution measure.
    """
    if branch.events:
        out = []
        for e in branch.folds():
            prof = e.data.get("profile")
            out.append(
                FoldPoint(e.parameter, prof, None if prof is None else prof.s_max_w)
            )
        return out
    params = branch.parameters
    s = branch.measures
    if params.size < 3:
        return []
    d = np.diff(params)
    out = []
    for i in range(1, d.size):
        if d[i - 1] * d[i] < 0.0:
            coeffs = np.polyfit(s[i - 1 : i + 2], params[i - 1 : i + 2], 2)
            if coeffs[0] == 0.0:
                out.append(FoldPoint(float(params[i]), None, float(s[i])))
                continue
            sv = -coeffs[1] / (2.0 * coeffs[0])
            out.append(FoldPoint(float(np.polyval(coeffs, sv)), None, float(sv)))
    return out


def harmonic_guess(
    m: ModelSpec,
    eq: Equilibrium,
    kappa: float,
    mode: FloatArray,
    amplitude: float = 1e-2,
    c: float = 0.0,
    n_nodes: int = DEFAULT_NODES,
) -> WaveProfile:
    """Small-amplitude wavetrain ``u* + amplitude * Re(mode e^{i kappa x})``.

    The mode is rotated so its first component is real and scaled to unit
    maximum modulus.
    """
    vec = np.asarray(mode, dtype=complex)
    if abs(vec[0]) > 0.0:
        vec = vec * np.conj(vec[0]) / abs(vec[0])
    vec = vec / np.max(np.abs(vec))
    L = 2.0 * np.pi / kappa
    x = np.arange(n_nodes) * (L / n_nodes)
    e = np.exp(1j * kappa * x)
    u = eq.state[:, np.newaxis] + amplitude * np.real(vec[:, np.newaxis] * e)
    ux = amplitude * np.real(1j * kappa * vec[:, np.newaxis] * e)
    mesh = MeshFunction(x, np.concatenate([u, ux]), L)
    return WaveProfile("wavetrain", mesh, float(c), dict(m.params), m)


@dataclass
class SeedResult:
    profile: WaveProfile
    onset: float
    kappa: float
    branch: Optional[Branch] = None
    notes: List[str] = field(default_factory=list)


def _interpolate(a: WaveProfile, b: WaveProfile, t: float, L: float) -> WaveProfile:
    if a.mesh.n_nodes != b.mesh.n_nodes or not np.allclose(a.mesh.tau, b.mesh.tau):
        b = b.rescaled(a.L).resampled(a.x)
    values = (1.0 - t) * a.mesh.values + t * b.mesh.values
    mesh = MeshFunction(a.mesh.tau * L, values, L)
    return replace(a, mesh=mesh, c=(1.0 - t) * a.c + t * b.c, uxx=None)


def seed_wavetrain(
    family: Family,
    parameter: str,
    L: float,
    bracket: Tuple[float, float],
    *,
    amplitude: float = 1e-2,
    target: Optional[float] = None,
    n_nodes: int = DEFAULT_NODES,
    step: Optional[StepControl] = None,
    tol: float = 1e-9,
) -> SeedResult:
    """Small-amplitude wavetrain at the onset of the mode with wavelength ``L``.

    The onset value of ``parameter`` for ``kappa = 2 pi / L`` is bracketed
    in ``bracket``. The seed is solved with an amplitude constraint and the
    parameter free, then optionally continued at fixed ``L`` to ``target``.
    """
    kappa = 2.0 * np.pi / L
    p_c = critical_parameter(family, kappa, bracket)
    m_c, eq = family(p_c)
    pairs = eig_dense(dispersion_matrix(m_c, eq, 0.0, kappa))
    j = int(np.argmax(pairs.values.real))
    lam = pairs.values[j]
    c = -float(lam.imag) / kappa
    logger.info(f"onset {parameter}={p_c:.8g} at kappa={kappa:.6g}, speed {c:.6g}")
    guess = harmonic_guess(m_c, eq, kappa, pairs.vectors[:, j], amplitude, c, n_nodes)

    free = WavetrainSystem(m_c, guess, parameter=parameter)
    target_amp = free.amplitude_value(guess.mesh.values)
    system = WavetrainSystem(m_c, guess, parameter=parameter, amplitude=target_amp)
    try:
        res = newton_solve(system.residual, system.pack(guess), system.jacobian, tol=tol)
    except NumericalError as e:
        raise NoConvergenceError(
            f"amplitude-constrained seed at {parameter}~{p_c:.6g} failed: {e}; "
            "try a smaller amplitude",
        ) from e
    seed = system.profile(res.x).with_derivatives()
    if seed.trivial:
        raise NumericalError("seed collapsed onto the homogeneous state")
    p_seed = seed.params[parameter]
    result = SeedResult(seed, p_c, kappa)
    if target is None or abs(target - p_seed) <= 1e-14:
        return result

    direction = 1 if target > p_seed else -1
    span = abs(target - p_seed)
    lo, hi = m_c.parameter_bounds(parameter)
    p_range = (
        max(min(p_seed, target) - span, lo),
        min(max(p_seed, target) + span, hi),
    )

    def crossed(point: BranchPoint) -> Optional[str]:
        return "target reached" if (point.parameter - target) * direction >= 0.0 else None

    branch = continue_branch(
        m_c,
        seed,
        p_range,
        parameter=parameter,
        step=step,
        direction=direction,
        stop=crossed,
    )
    result.branch = branch
    if branch.diagnostic != "target reached":
        raise NumericalError(
            f"continuation in {parameter} stopped before {target:g}: {branch.diagnostic}"
        )
    before, after = branch.points[-2], branch.points[-1]
    t = (target - before.parameter) / (after.parameter - before.parameter)
    guess_t = _interpolate(before.data["profile"], after.data["profile"], t, L)
    m_t = m_c.with_params(**{parameter: target})
    result.profile = solve_wavetrain(m_t, L, replace(guess_t, model=m_t, params=dict(m_t.params)))
    return result


def branch_segments(branch: Branch) -> List[Tuple[int, int]]:
    """Index ranges ``[start, stop]`` between consecutive folds."""
    cuts = sorted({e.index for e in branch.folds()})
    bounds: List[Tuple[int, int]] = []
    lo = 0
    for c in cuts:
        bounds.append((lo, c + 1))
        lo = c + 1
    bounds.append((lo, len(branch.points) - 1))
    return bounds


def profile_at(branch: Branch, L: float, segment: int = 0) -> WaveProfile:
    """Re-solved profile at wavelength ``L`` on the given fold-delimited segment."""
    segments = branch_segments(branch)
    if not 0 <= segment < len(segments):
        raise ValueError(f"branch has {len(segments)} segments, asked for {segment}")
    lo, hi = segments[segment]
    for j in range(lo, hi):
        a, b = branch.points[j], branch.points[j + 1]
        if (a.parameter - L) * (b.parameter - L) <= 0.0 and a.parameter != b.parameter:
            t = (L - a.parameter) / (b.parameter - a.parameter)
            guess = _interpolate(a.data["profile"], b.data["profile"], t, L)
            model = guess.model
            if model is None:
                raise ValueError("branch profiles carry no model")
            return solve_wavetrain(model, L, guess, reference=guess)
    raise ValueError(f"L={L:g} is not on segment {segment} of the branch")
