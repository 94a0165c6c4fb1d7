"""Periodic boundary value problems by piecewise-cubic collocation.

The scheme is Hermite-Simpson (three-point Lobatto collocation): on each mesh
interval the solution is the cubic that interpolates the nodal values and
slopes and satisfies the ODE at the midpoint. It is fourth-order accurate on
smooth problems.

Meshes are stored on the normalized period ``tau in [0, 1)`` times the
period, with the right endpoint identified with node 0 and not stored.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import interpolate, sparse

from wavespec.errors import WaveSpecError
from wavespec.numerics.newton import newton_solve
from wavespec.types import FieldJacobian, FloatArray, VectorField

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MIN_NODES = 8


@dataclass
class MeshFunction:
    """Vector values ``values[:, j]`` at nodes ``0 = x_0 < ... < x_{M-1} < period``."""

    nodes: FloatArray
    values: FloatArray
    period: float
    periodic: bool = True

    def __post_init__(self) -> None:
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.period = float(self.period)
        if self.nodes.ndim != 1 or self.nodes.size < MIN_NODES:
            raise ValueError(f"a mesh needs at least {MIN_NODES} nodes")
        if self.values.shape[1] != self.nodes.size:
            raise ValueError(
                f"values shape {self.values.shape} does not match {self.nodes.size} nodes"
            )
        if np.any(np.diff(self.nodes) <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.periodic and self.nodes[-1] >= self.nodes[0] + self.period:
            raise ValueError("periodic meshes do not store the right endpoint")

    @classmethod
    def uniform(
        cls, values: FloatArray, period: float, periodic: bool = True
    ) -> "MeshFunction":
        vals = np.atleast_2d(np.asarray(values, dtype=float))
        m = vals.shape[1]
        return cls(np.arange(m) * (period / m), vals, period, periodic)

    @property
    def n_components(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def tau(self) -> FloatArray:
        return np.asarray((self.nodes - self.nodes[0]) / self.period, dtype=float)

    def closed(self) -> Tuple[FloatArray, FloatArray]:
        """Nodes and values with the identified endpoint appended."""
        x = np.append(self.nodes, self.nodes[0] + self.period)
        y = np.concatenate([self.values, self.values[:, :1]], axis=1)
        return x, y

    def spline(self) -> interpolate.CubicSpline:
        x, y = self.closed()
        return interpolate.CubicSpline(x, y, axis=1, bc_type="periodic")

    def __call__(self, x: FloatArray) -> FloatArray:
        xs = self.nodes[0] + np.mod(np.asarray(x, dtype=float) - self.nodes[0], self.period)
        return np.asarray(self.spline()(xs), dtype=float)

    def resample(self, nodes: FloatArray) -> "MeshFunction":
        return MeshFunction(np.asarray(nodes, dtype=float), self(nodes), self.period)

    def rescaled(self, period: float) -> "MeshFunction":
        """Same values on the same normalized mesh over a new period."""
        ratio = float(period) / self.period
        return MeshFunction(self.nodes * ratio, self.values.copy(), period)

    def shifted(self, delta: float) -> "MeshFunction":
        """``x -> y(x + delta)`` sampled on the same nodes."""
        return MeshFunction(self.nodes, self(self.nodes + delta), self.period)


@dataclass
class BVPSolution:
    mesh: MeshFunction
    theta: FloatArray
    residual: float
    iterations: int
    history: List[float] = field(default_factory=list)

    @property
    def mu(self) -> Optional[float]:
        return float(self.theta[0]) if self.theta.size else None


def _pointwise_fd(
    rhs: VectorField, x: FloatArray, y: FloatArray, theta: FloatArray, f0: FloatArray
) -> FloatArray:
    n = y.shape[0]
    jac = np.empty((n, n, y.shape[1]))
    eps = np.sqrt(np.finfo(float).eps)
    for k in range(n):
        step = eps * np.maximum(1.0, np.abs(y[k]))
        yp = y.copy()
        yp[k] += step
        jac[:, k, :] = (rhs(x, yp, theta) - f0) / step
    return jac


class PeriodicCollocation:
    """Residual and sparse Jacobian of the Hermite-Simpson periodic system.

    Unknown vectors are node-major: ``z = Y.T.ravel()`` for ``Y`` of shape
    ``(n, M)``.
    """

    def __init__(
        self,
        rhs: VectorField,
        tau: FloatArray,
        n: int,
        jacobian: Optional[FieldJacobian] = None,
    ) -> None:
        self.rhs = rhs
        self.tau = np.asarray(tau, dtype=float)
        self.n = n
        self.m = self.tau.size
        self.field_jacobian = jacobian
        self.dtau = np.diff(np.append(self.tau, 1.0))
        self.nxt = np.roll(np.arange(self.m), -1)

    def pack(self, values: FloatArray) -> FloatArray:
        return np.asarray(values.T.ravel(), dtype=float)

    def unpack(self, z: FloatArray) -> FloatArray:
        return np.asarray(z[: self.n * self.m].reshape(self.m, self.n).T, dtype=float)

    def _stages(
        self, y: FloatArray, theta: FloatArray, period: float
    ) -> Tuple[FloatArray, ...]:
        x = self.tau * period
        h = self.dtau * period
        f = self.rhs(x, y, theta)
        y1 = y[:, self.nxt]
        f1 = f[:, self.nxt]
        xm = x + 0.5 * h
        ym = 0.5 * (y + y1) + (h / 8.0) * (f - f1)
        fm = self.rhs(xm, ym, theta)
        return x, h, f, y1, f1, xm, ym, fm

    def residual(self, y: FloatArray, theta: FloatArray, period: float) -> FloatArray:
        _, h, f, y1, f1, _, _, fm = self._stages(y, theta, period)
        res = y1 - y - (h / 6.0) * (f + 4.0 * fm + f1)
        return self.pack(res)

    def _field_jac(
        self, x: FloatArray, y: FloatArray, theta: FloatArray, f: FloatArray
    ) -> FloatArray:
        if self.field_jacobian is not None:
            return self.field_jacobian(x, y, theta)
        return _pointwise_fd(self.rhs, x, y, theta, f)

    def jacobian(
        self, y: FloatArray, theta: FloatArray, period: float
    ) -> sparse.csr_matrix:
        """Sparse derivative of ``residual`` with respect to the nodal values."""
        x, h, f, y1, f1, xm, ym, fm = self._stages(y, theta, period)
        n, m = self.n, self.m
        jac = np.moveaxis(self._field_jac(x, y, theta, f), -1, 0)
        jm = np.moveaxis(self._field_jac(xm, ym, theta, fm), -1, 0)
        jac1 = jac[self.nxt]
        eye = np.eye(n)[np.newaxis]
        hh = h[:, np.newaxis, np.newaxis]
        lo = -eye - (hh / 6.0) * (
            jac + 4.0 * jm @ (0.5 * eye + (hh / 8.0) * jac)
        )
        hi = eye - (hh / 6.0) * (
            jac1 + 4.0 * jm @ (0.5 * eye - (hh / 8.0) * jac1)
        )
        r_idx = np.arange(m)[:, np.newaxis, np.newaxis] * n + np.arange(n)[:, np.newaxis]
        c_lo = np.arange(m)[:, np.newaxis, np.newaxis] * n + np.arange(n)[np.newaxis, :]
        c_hi = self.nxt[:, np.newaxis, np.newaxis] * n + np.arange(n)[np.newaxis, :]
        rows = np.broadcast_to(r_idx, lo.shape)
        data = np.concatenate([lo.ravel(), hi.ravel()])
        ii = np.concatenate([rows.ravel(), rows.ravel()])
        jj = np.concatenate(
            [np.broadcast_to(c_lo, lo.shape).ravel(), np.broadcast_to(c_hi, hi.shape).ravel()]
        )
        return sparse.csr_matrix((data, (ii, jj)), shape=(n * m, n * m))

    def param_columns(
        self,
        y: FloatArray,
        theta: FloatArray,
        period: float,
        *,
        with_period: bool = False,
        n_free: Optional[int] = None,
    ) -> FloatArray:
        """Finite-difference columns for the free scalars (and the period)."""
        base = self.residual(y, theta, period)
        cols: List[FloatArray] = []
        eps = np.sqrt(np.finfo(float).eps)
        for k in range(theta.size if n_free is None else n_free):
            step = eps * max(1.0, abs(theta[k]))
            tp = theta.copy()
            tp[k] += step
            cols.append((self.residual(y, tp, period) - base) / step)
        if with_period:
            step = eps * max(1.0, abs(period))
            cols.append((self.residual(y, theta, period + step) - base) / step)
        if not cols:
            return np.zeros((base.size, 0))
        return np.stack(cols, axis=1)

    def weights(self) -> FloatArray:
        """Trapezoid weights on the normalized periodic mesh."""
        return 0.5 * (self.dtau + np.roll(self.dtau, 1))

    def phase_row(self, reference: MeshFunction) -> Tuple[FloatArray, float]:
        """Linear phase functional ``z -> row @ z - offset``.

        Discretizes ``int <y - y_ref, y_ref'> d tau`` with the reference slope
        normalized to unit weighted norm.
        """
        spline = reference.spline()
        slope = np.asarray(spline.derivative()(reference.nodes), dtype=float)
        w = self.weights()
        norm = float(np.sqrt(np.sum(w * np.sum(slope * slope, axis=0))))
        if norm == 0.0:
            raise WaveSpecError("phase reference is constant; it fixes no translation")
        row = self.pack(slope * w / norm)
        return row, float(row @ self.pack(reference.values))

    def defect(self, y: FloatArray, theta: FloatArray, period: float) -> FloatArray:
        """ODE defect of the collocation cubic at the interval quarter points."""
        x, h, f, y1, f1, *_ = self._stages(y, theta, period)
        xs = np.append(x, period)
        ys = np.concatenate([y, y[:, :1]], axis=1)
        fs = np.concatenate([f, f[:, :1]], axis=1)
        cubic = interpolate.CubicHermiteSpline(xs, ys, fs, axis=1)
        xq = np.concatenate([x + 0.25 * h, x + 0.75 * h])
        yq = cubic(xq)
        d = cubic.derivative()(xq) - self.rhs(xq, yq, theta)
        per = np.max(np.abs(d), axis=0)
        return np.asarray(np.maximum(per[: self.m], per[self.m :]), dtype=float)


def equidistributed_tau(
    f: FloatArray, tau: FloatArray, m_new: Optional[int] = None
) -> FloatArray:
    """New normalized nodes equidistributing a curvature monitor."""
    m = tau.size
    dtau = np.diff(np.append(tau, 1.0))
    slope_jump = np.linalg.norm(np.roll(f, -1, axis=1) - f, axis=0) / np.maximum(dtau, 1e-300)
    scale = float(np.mean(slope_jump)) or 1.0
    density = np.sqrt(1.0 + slope_jump / scale)
    cumulative = np.concatenate([[0.0], np.cumsum(density * dtau)])
    cumulative /= cumulative[-1]
    target = np.arange(m_new or m) / float(m_new or m)
    return np.asarray(np.interp(target, cumulative, np.append(tau, 1.0)), dtype=float)


def regrid(
    mesh: MeshFunction,
    rhs: VectorField,
    theta: FloatArray,
    m_new: Optional[int] = None,
) -> MeshFunction:
    """Move the nodes by equidistribution and interpolate the solution."""
    f = rhs(mesh.nodes, mesh.values, theta)
    tau = equidistributed_tau(f, mesh.tau, m_new)
    x, y = mesh.closed()
    fs = np.concatenate([f, f[:, :1]], axis=1)
    cubic = interpolate.CubicHermiteSpline(x, y, fs, axis=1)
    new_nodes = mesh.nodes[0] + tau * mesh.period
    logger.info(f"regrid: {mesh.n_nodes} -> {new_nodes.size} nodes")
    return MeshFunction(new_nodes, cubic(new_nodes), mesh.period)


def solve_periodic_bvp(
    rhs: VectorField,
    period: float,
    guess: MeshFunction,
    *,
    mu: Optional[float] = None,
    theta: Sequence[float] = (),
    reference: Optional[MeshFunction] = None,
    jacobian: Optional[FieldJacobian] = None,
    tol: float = 1e-9,
    max_iter: int = 40,
    lstsq_cond: float = 1e-6,
) -> BVPSolution:
    """Solve ``y' = rhs(x, y, theta)`` with ``y(0) = y(period)``.

    ``mu`` (if given) is an unknown scalar solved together with the profile
    and enters ``rhs`` as the first entry of ``theta``; further fixed scalars
    follow it. The integral phase condition against ``reference`` (default:
    the guess) removes the translation invariance of autonomous problems.
    Without ``mu`` the system is overdetermined by the phase row and is
    solved by truncated minimum-norm Gauss-Newton steps.
    """
    if abs(guess.period - period) > 1e-12 * max(1.0, period):
        guess = guess.rescaled(period)
    ref = reference if reference is not None else guess
    if ref.n_nodes != guess.n_nodes or not np.allclose(ref.nodes, guess.nodes):
        ref = ref.rescaled(period).resample(guess.nodes)
    colloc = PeriodicCollocation(rhs, guess.tau, guess.n_components, jacobian)
    row, offset = colloc.phase_row(ref)
    fixed = np.asarray(theta, dtype=float)
    free = 0 if mu is None else 1
    nm = colloc.n * colloc.m

    def split(z: FloatArray) -> Tuple[FloatArray, FloatArray]:
        th = np.concatenate([z[nm:], fixed])
        return colloc.unpack(z), th

    def residual(z: FloatArray) -> FloatArray:
        y, th = split(z)
        return np.concatenate([colloc.residual(y, th, period), [row @ z[:nm] - offset]])

    def jac(z: FloatArray) -> sparse.spmatrix:
        y, th = split(z)
        jy = colloc.jacobian(y, th, period)
        bottom = sparse.csr_matrix(np.append(row, np.zeros(free))[np.newaxis])
        if free:
            cols = colloc.param_columns(y, th, period, n_free=free)
            top = sparse.hstack([jy, sparse.csr_matrix(cols)])
        else:
            top = jy
        return sparse.vstack([top, bottom]).tocsr()

    z0 = np.concatenate([colloc.pack(guess.values), [] if mu is None else [float(mu)]])
    result = newton_solve(
        residual, z0, jac, tol=tol, max_iter=max_iter, lstsq_cond=lstsq_cond
    )
    y, th = split(result.x)
    return BVPSolution(
        mesh=MeshFunction(guess.nodes, y, period),
        theta=np.asarray(result.x[nm:], dtype=float),
        residual=result.residual,
        iterations=result.iterations,
        history=result.history,
    )


def max_defect(solution: BVPSolution, rhs: VectorField, fixed: Sequence[float] = ()) -> float:
    mesh = solution.mesh
    colloc = PeriodicCollocation(rhs, mesh.tau, mesh.n_components)
    th = np.concatenate([solution.theta, np.asarray(fixed, dtype=float)])
    return float(np.max(colloc.defect(mesh.values, th, mesh.period)))

