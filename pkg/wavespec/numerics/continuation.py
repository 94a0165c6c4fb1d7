"""Pseudo-arclength continuation of ``G(z) = 0`` for ``G: R^{n+1} -> R^n``.

The continuation parameter is one component of ``z`` (the last one by
default). Folds are flagged where that component of the unit tangent changes
sign and are located by bisection along the secant direction.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from wavespec.errors import NumericalError, ParabolicityError
from wavespec.numerics.newton import fd_jacobian, newton_solve, solve_linear
from wavespec.types import FloatArray, SparseOrDense

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

ResidualFn = Callable[[FloatArray], FloatArray]
JacobianFn = Callable[[FloatArray], SparseOrDense]


@dataclass
class StepControl:
    h0: float = 0.05
    hmin: float = 1e-6
    hmax: float = 1.0
    grow: float = 1.5
    max_steps: int = 1000
    newton_tol: float = 1e-10
    max_newton: int = 12
    easy_iterations: int = 3
    max_arclength: float = np.inf

    def __post_init__(self) -> None:
        if not 0.0 < self.hmin <= self.h0 <= self.hmax:
            raise ValueError("step control needs 0 < hmin <= h0 <= hmax")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")


@dataclass
class BranchPoint:
    parameter: float
    state: FloatArray
    measure: float
    tangent: FloatArray
    arclength: float = 0.0
    stable: Optional[bool] = None
    data: Dict[str, Any] = field(default_factory=dict)


@dataclass
class BranchEvent:
    kind: str
    index: int
    parameter: float
    state: FloatArray
    data: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Branch:
    points: List[BranchPoint] = field(default_factory=list)
    events: List[BranchEvent] = field(default_factory=list)
    step_history: List[float] = field(default_factory=list)
    diagnostic: Optional[str] = None
    p_index: int = -1

    def __len__(self) -> int:
        return len(self.points)

    @property
    def parameters(self) -> FloatArray:
        return np.array([p.parameter for p in self.points])

    @property
    def measures(self) -> FloatArray:
        return np.array([p.measure for p in self.points])

    def folds(self) -> List[BranchEvent]:
        return [e for e in self.events if e.kind == "fold"]

    def extend(self, other: "Branch") -> None:
        """Append a continuation of this branch (its first point duplicates our last)."""
        offset = len(self.points) - 1
        arc0 = self.points[-1].arclength if self.points else 0.0
        for p in other.points[1:]:
            p.arclength += arc0
            self.points.append(p)
        for e in other.events:
            e.index += offset
            self.events.append(e)
        self.step_history.extend(other.step_history)
        self.diagnostic = other.diagnostic


def _wnorm(v: FloatArray, w: FloatArray) -> float:
    return float(np.sqrt(np.sum(w * v * v)))


class _Continuer:
    def __init__(
        self,
        residual: ResidualFn,
        jacobian: Optional[JacobianFn],
        weights: FloatArray,
        control: StepControl,
        p_index: int,
    ) -> None:
        self.residual = residual
        self.jacobian = jacobian
        self.w = weights
        self.control = control
        self.p = p_index

    def jac(self, z: FloatArray) -> SparseOrDense:
        if self.jacobian is not None:
            return self.jacobian(z)
        return fd_jacobian(self.residual, z)

    def tangent(self, z: FloatArray, orient: FloatArray) -> FloatArray:
        """Unit tangent at ``z`` with ``<t, orient>_W > 0``."""
        j = self.jac(z)
        border = (self.w * orient)[np.newaxis]
        rhs = np.zeros(z.size)
        rhs[-1] = 1.0
        if sparse.issparse(j):
            mat: SparseOrDense = sparse.vstack([j, sparse.csr_matrix(border)]).tocsr()
        else:
            mat = np.vstack([np.asarray(j), border])
        t = solve_linear(mat, rhs)
        return t / _wnorm(t, self.w)

    def null_tangent(self, z: FloatArray, direction: int) -> FloatArray:
        j = self.jac(z)
        dense = j.toarray() if sparse.issparse(j) else np.asarray(j)
        _, _, vt = np.linalg.svd(dense * (1.0 / np.sqrt(self.w))[np.newaxis])
        t = vt[-1] / np.sqrt(self.w)
        if t[self.p] * direction < 0:
            t = -t
        return t / _wnorm(t, self.w)

    def correct(
        self, z_pred: FloatArray, t: FloatArray
    ) -> Tuple[FloatArray, int]:
        row = self.w * t
        offset = float(row @ z_pred)

        def full(z: FloatArray) -> FloatArray:
            return np.append(self.residual(z), row @ z - offset)

        def full_jac(z: FloatArray) -> SparseOrDense:
            j = self.jac(z)
            if sparse.issparse(j):
                return sparse.vstack([j, sparse.csr_matrix(row[np.newaxis])]).tocsr()
            return np.vstack([np.asarray(j), row[np.newaxis]])

        res = newton_solve(
            full,
            z_pred,
            full_jac,
            tol=self.control.newton_tol,
            max_iter=self.control.max_newton,
        )
        return res.x, res.iterations

    def refine_fold(
        self,
        z_a: FloatArray,
        z_b: FloatArray,
        d: FloatArray,
        sign_a: float,
        h: float,
        tol: float,
    ) -> Tuple[FloatArray, FloatArray]:
        """Bisect on the step length from ``z_a`` along ``d`` until the fold is bracketed."""
        s_lo, s_hi = 0.0, h
        z_lo, z_hi = z_a, z_b
        z_mid, t_mid = z_a, d
        for _ in range(60):
            s = 0.5 * (s_lo + s_hi)
            z_mid, _ = self.correct(z_a + s * d, d)
            t_mid = self.tangent(z_mid, d)
            if np.sign(t_mid[self.p]) == sign_a:
                s_lo, z_lo = s, z_mid
            else:
                s_hi, z_hi = s, z_mid
            if abs(z_hi[self.p] - z_lo[self.p]) <= tol and s_hi - s_lo <= np.sqrt(tol):
                break
        return z_mid, t_mid


def arclength_continue(
    residual: ResidualFn,
    z0: FloatArray,
    *,
    jacobian: Optional[JacobianFn] = None,
    step: Optional[StepControl] = None,
    direction: int = 1,
    tangent: Optional[FloatArray] = None,
    weights: Optional[FloatArray] = None,
    measure: Optional[Callable[[FloatArray], float]] = None,
    stop: Optional[Callable[[BranchPoint], Optional[str]]] = None,
    on_accept: Optional[Callable[[BranchPoint], None]] = None,
    p_index: int = -1,
    p_range: Optional[Tuple[float, float]] = None,
    fold_tol: float = 1e-6,
) -> Branch:
    """Trace the solution curve of ``residual`` through the converged point ``z0``.

    Corrector failures halve the step; reaching ``hmin`` truncates the branch
    with a diagnostic instead of raising.
    """
    control = step or StepControl()
    z = np.array(z0, dtype=float)
    p = p_index % z.size
    w = np.ones(z.size) if weights is None else np.asarray(weights, dtype=float)
    cont = _Continuer(residual, jacobian, w, control, p)
    meas = measure or (lambda zz: float(np.linalg.norm(zz[:p])))

    if tangent is None:
        t = cont.null_tangent(z, direction)
    else:
        t = cont.tangent(z, np.asarray(tangent, dtype=float))
    branch = Branch(p_index=p)
    first = BranchPoint(float(z[p]), z.copy(), meas(z), t.copy())
    if on_accept is not None:
        on_accept(first)
    branch.points.append(first)

    h = control.h0
    arc = 0.0
    z_prev: Optional[FloatArray] = None
    for _ in range(control.max_steps):
        if arc >= control.max_arclength:
            branch.diagnostic = "arclength limit"
            break
        # secant predictor once two points are known
        direc = t
        if z_prev is not None:
            sec = z - z_prev
            n_sec = _wnorm(sec, w)
            if n_sec > 0.0 and float(np.sum(w * sec * t)) > 0.0:
                direc = sec / n_sec
        try:
            z_new, its = cont.correct(z + h * direc, direc)
            t_new = cont.tangent(z_new, t)
        except (NumericalError, ParabolicityError) as e:
            h *= 0.5
            logger.warning(f"continuation step failed ({e}); halving step to {h:.3g}")
            if h < control.hmin:
                branch.diagnostic = f"step underflow at p={z[p]:.8g}: {e}"
                logger.warning(f"branch truncated: {branch.diagnostic}")
                break
            continue
        if p_range is not None and not p_range[0] <= z_new[p] <= p_range[1]:
            branch.diagnostic = "parameter range end"
            break

        if t[p] * t_new[p] < 0.0:
            z_f, t_f = cont.refine_fold(
                z, z_new, direc, float(np.sign(t[p])), h, fold_tol
            )
            branch.events.append(
                BranchEvent(
                    "fold",
                    len(branch.points) - 1,
                    float(z_f[p]),
                    z_f,
                    {"tangent": t_f},
                )
            )
            logger.info(f"fold detected near p={z_f[p]:.8g}")

        arc += h
        z_prev, z, t = z, z_new, t_new
        point = BranchPoint(float(z[p]), z.copy(), meas(z), t.copy(), arc)
        if on_accept is not None:
            on_accept(point)
        branch.points.append(point)
        branch.step_history.append(h)
        logger.debug(f"continuation: p={z[p]:.8g} h={h:.3g} newton={its}")
        if stop is not None:
            reason = stop(point)
            if reason:
                branch.diagnostic = reason
                break
        if its <= control.easy_iterations:
            h = min(h * control.grow, control.hmax)
    else:
        branch.diagnostic = "step limit"
    return branch
