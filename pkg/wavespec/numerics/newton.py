import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from wavespec.errors import (
    NoConvergenceError,
    ParabolicityError,
    SingularJacobianError,
)
from wavespec.types import FloatArray, SparseOrDense

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

ResidualFn = Callable[[FloatArray], FloatArray]
JacobianFn = Callable[[FloatArray], SparseOrDense]


@dataclass
class NewtonResult:
    x: FloatArray
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)


def fd_jacobian(
    residual: ResidualFn, x: FloatArray, fx: Optional[FloatArray] = None
) -> FloatArray:
    """Forward-difference Jacobian, one column per unknown."""
    f0 = residual(x) if fx is None else fx
    jac = np.empty((f0.size, x.size))
    eps = np.sqrt(np.finfo(float).eps)
    for j in range(x.size):
        step = eps * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += step
        jac[:, j] = (residual(xp) - f0) / step
    return jac


def solve_linear(
    jac: SparseOrDense, rhs: FloatArray, *, lstsq_cond: float = 1e-10
) -> FloatArray:
    """Solve ``J dx = rhs``.

    Non-square systems get the minimum-norm least-squares step with singular
    values below ``lstsq_cond * s_max`` truncated.
    """
    n_rows, n_cols = jac.shape
    if n_rows != n_cols:
        dense = jac.toarray() if sparse.issparse(jac) else np.asarray(jac)
        sol, *_ = linalg.lstsq(dense, rhs, cond=lstsq_cond)
        return np.asarray(sol, dtype=float)
    if sparse.issparse(jac):
        try:
            lu = splinalg.splu(sparse.csc_matrix(jac))
        except RuntimeError as e:
            raise SingularJacobianError(f"sparse LU failed: {e}") from e
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SingularJacobianError("sparse LU produced a non-finite step")
        return np.asarray(sol, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return np.asarray(linalg.solve(np.asarray(jac), rhs), dtype=float)
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise SingularJacobianError(f"Newton matrix is singular: {e}") from e


def _norm(v: FloatArray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _trial(residual: ResidualFn, x: FloatArray) -> Optional[FloatArray]:
    try:
        fx = residual(x)
    except (ParabolicityError, FloatingPointError, np.linalg.LinAlgError):
        return None
    return fx if bool(np.all(np.isfinite(fx))) else None


def newton_solve(
    residual: ResidualFn,
    x0: Union[FloatArray, Sequence[float]],
    jacobian: Optional[JacobianFn] = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
    min_damping: float = 1.0 / 1024.0,
    lstsq_cond: float = 1e-10,
) -> NewtonResult:
    """Damped Newton iteration with an Armijo backtracking line search.

    Converged means ``max|F(x)| <= tol``. A trial point where the residual
    cannot be evaluated (outside the parabolic region, overflow) counts as a
    failed trial and the step is shortened.
    """
    x = np.array(x0, dtype=float)
    fx = residual(x)
    r = _norm(fx)
    history = [r]
    if r <= tol:
        return NewtonResult(x, 0, r, history)
    for it in range(1, max_iter + 1):
        jac = jacobian(x) if jacobian is not None else fd_jacobian(residual, x, fx)
        dx = solve_linear(jac, -fx, lstsq_cond=lstsq_cond)
        norm2 = float(np.linalg.norm(fx))
        lam = 1.0
        while True:
            ft = _trial(residual, x + lam * dx)
            if ft is not None and (
                float(np.linalg.norm(ft)) <= (1.0 - 1e-4 * lam) * norm2
                or _norm(ft) <= tol
            ):
                break
            lam *= 0.5
            if lam < min_damping:
                raise NoConvergenceError(
                    f"line search failed at iteration {it} (residual {r:.3e})",
                    residual=r,
                    history=history,
                )
        assert ft is not None  # noqa: S101  # assertion is a type guard
        x = x + lam * dx
        fx = ft
        r = _norm(fx)
        history.append(r)
        logger.debug(f"newton iteration {it}: residual {r:.3e}, damping {lam:g}")
        if r <= tol:
            return NewtonResult(x, it, r, history)
    raise NoConvergenceError(
        f"Newton did not converge in {max_iter} iterations (residual {r:.3e})",
        residual=r,
        history=history,
    )
