import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from wavespec.errors import StiffnessError

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


@dataclass
class IVPResult:
    y_end: np.ndarray
    x: np.ndarray
    y: np.ndarray
    nfev: int
    sol: Optional[Callable[[Any], np.ndarray]] = None


def integrate_ivp(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    span: Tuple[float, float],
    y0: Sequence[Any],
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    dense_output: bool = False,
    t_eval: Optional[np.ndarray] = None,
    method: str = "DOP853",
    max_step: float = np.inf,
) -> IVPResult:
    """Adaptive embedded Runge-Kutta integration (8(5,3) by default).

    Complex initial data integrate in complex arithmetic.
    """
    y_init = np.asarray(y0)
    if not np.iscomplexobj(y_init):
        y_init = y_init.astype(float)
    grid: Optional[np.ndarray] = None
    extra = False
    if t_eval is not None:
        # y_end must be y(span[1]) even when the samples stop short of it
        grid = np.asarray(t_eval, dtype=float)
        extra = grid.size == 0 or bool(grid[-1] != float(span[1]))
        if extra:
            grid = np.append(grid, float(span[1]))
    sol = solve_ivp(
        rhs,
        (float(span[0]), float(span[1])),
        y_init,
        method=method,
        rtol=rtol,
        atol=atol,
        dense_output=dense_output,
        t_eval=grid,
        max_step=max_step,
    )
    if sol.status != 0:
        raise StiffnessError(
            f"{method} failed on [{span[0]:.6g}, {span[1]:.6g}]: {sol.message}; "
            "the problem looks stiff, use the implicit path"
        )
    y_end = sol.y[:, -1]
    if not np.all(np.isfinite(y_end)):
        raise StiffnessError("integration produced non-finite values")
    keep = slice(None, -1) if extra else slice(None)
    return IVPResult(
        y_end=y_end,
        x=sol.t[keep],
        y=sol.y[:, keep],
        nfev=int(sol.nfev),
        sol=sol.sol if dense_output else None,
    )
