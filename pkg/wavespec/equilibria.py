import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from wavespec import WaveSpec
from wavespec.errors import NumericalError, ParabolicityError
from wavespec.model import ModelSpec, check_parabolic
from wavespec.numerics.newton import newton_solve
from wavespec.types import FloatArray

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MERGE_DISTANCE = 1e-6
COALESCENCE_TOL = 1e-8
RESIDUAL_TOL = 1e-10


@dataclass
class Equilibrium:
    state: FloatArray
    params: Dict[str, float]
    label: str
    fold_degenerate: bool = False
    note: str = ""
    parabolic: bool = True
    max_re_lambda: Optional[float] = None
    kappa_star: Optional[float] = None

    def __post_init__(self) -> None:
        self.state = np.asarray(self.state, dtype=float)

    def residual(self, m: ModelSpec) -> float:
        f = m.reaction(self.state, np.zeros_like(self.state))
        return float(np.max(np.abs(f)))


def saddle_node_threshold(B: float) -> float:
    """Value ``A_sn`` of the rainfall parameter where the vegetated states coalesce."""
    if B < 0:
        raise ValueError(f"B must be non-negative, got {B}")
    return 4.0 * B * B


def gsk_equilibria(A: float, B: float) -> List[Equilibrium]:
    """Closed-form homogeneous states of the GSK model.

    The desert ``(1, 0)`` always exists. For ``A >= 4 B^2`` the vegetated pair
    ``w_pm = (A -+ sqrt(A^2 - 4 A B^2)) / (2A)``, ``v = B / w`` is added; the
    smaller root is taken from the product ``w_+ w_- = B^2 / A`` to avoid
    cancellation.
    """
    if A < 0 or B < 0:
        raise ValueError(f"GSK equilibria need A >= 0 and B >= 0, got A={A}, B={B}")
    params = {"A": float(A), "B": float(B)}
    desert = Equilibrium(np.array([1.0, 0.0]), dict(params), "desert")
    if B == 0.0:
        desert.note = "B = 0: vegetated states degenerate (division by 2B)"
        return [desert]
    a_sn = saddle_node_threshold(B)
    if A == 0.0 or A < a_sn * (1.0 - 1e-14):
        return [desert]
    disc = max(A * (A - a_sn), 0.0)
    w_minus = (A + math.sqrt(disc)) / (2.0 * A)
    w_plus = B * B / (A * w_minus)
    if abs(w_minus - w_plus) <= COALESCENCE_TOL:
        w = 0.5 * (w_minus + w_plus)
        merged = Equilibrium(
            np.array([w, B / w]),
            dict(params),
            "plus",
            fold_degenerate=True,
            note="vegetated states coalesce at the saddle-node",
        )
        return [desert, merged]
    return [
        desert,
        Equilibrium(np.array([w_plus, B / w_plus]), dict(params), "plus"),
        Equilibrium(np.array([w_minus, B / w_minus]), dict(params), "minus"),
    ]


def _solve_from(m: ModelSpec, start: FloatArray, tol: float) -> Optional[FloatArray]:
    zero = np.zeros(m.n_species)

    def residual(u: FloatArray) -> FloatArray:
        return np.asarray(m.reaction(u, zero), dtype=float)

    def jacobian(u: FloatArray) -> FloatArray:
        return np.asarray(m.reaction_jacobians(u, zero)[0], dtype=float)

    try:
        with np.errstate(over="raise", invalid="raise"):
            result = newton_solve(residual, start, jacobian, tol=tol, max_iter=60)
    except (NumericalError, ParabolicityError, FloatingPointError):
        return None
    if not np.all(np.isfinite(result.x)):
        return None
    return result.x


def _label_gsk(m: ModelSpec, state: FloatArray) -> str:
    closed = gsk_equilibria(m.params["A"], m.params["B"])
    dist = [float(np.max(np.abs(e.state - state))) for e in closed]
    return closed[int(np.argmin(dist))].label


def find_equilibria(
    m: ModelSpec,
    search_box: Sequence[Tuple[float, float]],
    n_starts: int = 64,
    tol: float = 1e-12,
) -> List[Equilibrium]:
    """Homogeneous states of any model by Newton from a Halton grid of starts.

    Converged states are not restricted to the search box. States closer than
    ``1e-6`` are merged and the output is sorted lexicographically.
    """
    box = np.asarray(search_box, dtype=float)
    if box.shape != (m.n_species, 2) or np.any(box[:, 0] >= box[:, 1]):
        raise ValueError(f"search_box must be {m.n_species} ordered (lo, hi) pairs")
    sampler = qmc.Halton(d=m.n_species, scramble=False)
    starts = qmc.scale(sampler.random(n_starts), box[:, 0], box[:, 1])

    with ThreadPoolExecutor(max_workers=WaveSpec.get_threads()) as pool:
        solved = list(pool.map(lambda s: _solve_from(m, s, tol), starts))

    found: List[FloatArray] = []
    for u in solved:
        if u is None:
            continue
        if float(np.max(np.abs(m.reaction(u, np.zeros_like(u))))) > RESIDUAL_TOL:
            continue
        if any(float(np.linalg.norm(u - v)) <= MERGE_DISTANCE for v in found):
            continue
        found.append(u)
    found.sort(key=lambda u: tuple(np.round(u, 8)))

    params = dict(m.params)
    out: List[Equilibrium] = []
    for k, u in enumerate(found):
        label = _label_gsk(m, u) if m.name == "gsk" else f"eq{k}"
        eq = Equilibrium(u, dict(params), label, parabolic=check_parabolic(m, u))
        if not eq.parabolic:
            eq.note = "outside the parabolic region"
        out.append(eq)
    logger.debug(f"find_equilibria: {len(out)} states from {n_starts} starts")
    return out


def equilibria_for(m: ModelSpec) -> List[Equilibrium]:
    """Closed forms for GSK models, Halton search otherwise."""
    if m.name == "gsk":
        eqs = gsk_equilibria(m.params["A"], m.params["B"])
        for e in eqs:
            e.params = dict(m.params)
            e.parabolic = check_parabolic(m, e.state)
        return eqs
    box = [(-2.0, 2.0)] * m.n_species
    return find_equilibria(m, box)
