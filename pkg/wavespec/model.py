"""Quasilinear reaction-diffusion systems ``u_t = (a(u) u_x)_x + f(u, u_x)``.

Array conventions: states are species-first. A single state has shape ``(N,)``,
a field sampled on ``K`` points has shape ``(N, K)``. Matrix-valued functions
follow the same rule, ``a(u)`` is ``(N, N)`` or ``(N, N, K)``.

``diffusion_jacobian`` returns ``Da[i, j, k] = d a_ij / d u_k`` so that the
directional derivative is ``(a'(u) h)_ij = sum_k Da[i, j, k] h_k``.
``diffusion_hessian`` returns ``Ha[i, j, k, l] = d^2 a_ij / (d u_k d u_l)``.
"""
import abc
import dataclasses
import logging
from types import MappingProxyType
from typing import TYPE_CHECKING, ClassVar, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from wavespec.errors import ParabolicityError, ParameterDomainError
from wavespec.types import BoolArray, FloatArray

if TYPE_CHECKING:
    from wavespec.wavetrain import WaveProfile

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


class ModelSpec(abc.ABC):
    """An immutable quasilinear system with named real parameters."""

    name: ClassVar[str] = "model"
    n_species: int

    def __init__(self, n_species: int, params: Mapping[str, float]) -> None:
        self.n_species = n_species
        self._params = {k: float(v) for k, v in params.items()}

    @property
    def params(self) -> Mapping[str, float]:
        return MappingProxyType(self._params)

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self._params.items())
        return f"{type(self).__name__}({params})"

    def __eq__(self, other: object) -> bool:
        return (
            type(other) is type(self)
            and isinstance(other, ModelSpec)
            and dict(other.params) == dict(self.params)
        )

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self._params.items()))))

    @abc.abstractmethod
    def with_params(self, **updates: float) -> "ModelSpec":
        raise NotImplementedError

    @abc.abstractmethod
    def diffusion(self, u: FloatArray) -> FloatArray:
        raise NotImplementedError

    @abc.abstractmethod
    def diffusion_jacobian(self, u: FloatArray) -> FloatArray:
        raise NotImplementedError

    @abc.abstractmethod
    def diffusion_hessian(self, u: FloatArray) -> FloatArray:
        raise NotImplementedError

    @abc.abstractmethod
    def reaction(self, u: FloatArray, p: FloatArray) -> FloatArray:
        raise NotImplementedError

    @abc.abstractmethod
    def reaction_jacobians(
        self, u: FloatArray, p: FloatArray
    ) -> Tuple[FloatArray, FloatArray]:
        """Return ``(d f / d u, d f / d u_x)`` with the shape of ``diffusion``."""
        raise NotImplementedError

    @abc.abstractmethod
    def in_domain(self, u: FloatArray) -> BoolArray:
        """Pointwise domain predicate for a state or a sampled field."""
        raise NotImplementedError

    def domain_predicate(self, u: FloatArray) -> bool:
        return bool(np.all(self.in_domain(np.asarray(u, dtype=float))))

    def parameter_bounds(self, name: str) -> Tuple[float, float]:
        """Closed range of admissible values of one parameter."""
        return -np.inf, np.inf


def _zeros_like_matrix(u: FloatArray, n: int) -> FloatArray:
    return np.zeros((n, n) + u.shape[1:])


class GSKModel(ModelSpec):
    """Gray-Scott-Klausmeier model with porous-medium water diffusion.

    ``w_t = (w^2)_xx + C w_x + A (1 - w) - w v^2``,
    ``v_t = D v_xx - B v + w v^2``.
    """

    name = "gsk"

    def __init__(self, A: float, B: float, C: float, D: float) -> None:
        super().__init__(2, {"A": A, "B": B, "C": C, "D": D})

    def with_params(self, **updates: float) -> "GSKModel":
        params = dict(self.params)
        unknown = set(updates) - set(params)
        if unknown:
            raise KeyError(f"unknown GSK parameters: {sorted(unknown)}")
        params.update(updates)
        return make_gsk(**params)

    def parameter_bounds(self, name: str) -> Tuple[float, float]:
        if name in ("A", "B"):
            return 0.0, np.inf
        if name == "D":
            return float(np.finfo(float).tiny), np.inf
        return -np.inf, np.inf

    def diffusion(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        a = _zeros_like_matrix(u, 2)
        a[0, 0] = 2.0 * u[0]
        a[1, 1] = self.params["D"]
        return a

    def diffusion_jacobian(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        da = np.zeros((2, 2, 2) + u.shape[1:])
        da[0, 0, 0] = 2.0
        return da

    def diffusion_hessian(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        return np.zeros((2, 2, 2, 2) + u.shape[1:])

    def reaction(self, u: FloatArray, p: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        p = np.asarray(p, dtype=float)
        A, B, C = self.params["A"], self.params["B"], self.params["C"]
        w, v = u[0], u[1]
        wv2 = w * v * v
        return np.stack([C * p[0] + A * (1.0 - w) - wv2, -B * v + wv2])

    def reaction_jacobians(
        self, u: FloatArray, p: FloatArray
    ) -> Tuple[FloatArray, FloatArray]:
        u = np.asarray(u, dtype=float)
        A, B, C = self.params["A"], self.params["B"], self.params["C"]
        w, v = u[0], u[1]
        d1 = _zeros_like_matrix(u, 2)
        d1[0, 0] = -A - v * v
        d1[0, 1] = -2.0 * w * v
        d1[1, 0] = v * v
        d1[1, 1] = -B + 2.0 * w * v
        d2 = _zeros_like_matrix(u, 2)
        d2[0, 0] = C
        return d1, d2

    def in_domain(self, u: FloatArray) -> BoolArray:
        return np.asarray(np.asarray(u, dtype=float)[0] > 0.0)


def make_gsk(A: float, B: float, C: float, D: float) -> GSKModel:
    if D <= 0:
        raise ParameterDomainError(
            f"GSK needs D > 0 (degenerate second-species diffusion), got D={D}",
            parameter="D",
            value=D,
        )
    for name, value in (("A", A), ("B", B)):
        if value < 0:
            raise ParameterDomainError(
                f"GSK needs A >= 0 and B >= 0, got {name}={value}", parameter=name, value=value
            )
    return GSKModel(A, B, C, D)


class PolynomialScalarModel(ModelSpec):
    """``u_t = (a(u) u_x)_x + r(u) + b u_x`` with polynomial ``a`` and ``r``.

    ``a(u) = sum_k d_k u^k`` and ``r(u) = sum_k r_k u^k``.
    """

    name = "scalar"

    def __init__(
        self, diffusion: Sequence[float], reaction: Sequence[float], advection: float
    ) -> None:
        params = {f"d{k:02d}": float(c) for k, c in enumerate(diffusion)}
        params.update({f"r{k:02d}": float(c) for k, c in enumerate(reaction)})
        params["b"] = float(advection)
        super().__init__(1, params)
        self._d = np.array([float(c) for c in diffusion])
        self._r = np.array([float(c) for c in reaction])

    def with_params(self, **updates: float) -> "PolynomialScalarModel":
        params = dict(self.params)
        unknown = set(updates) - set(params)
        if unknown:
            raise KeyError(f"unknown scalar-model parameters: {sorted(unknown)}")
        params.update(updates)
        d = [params[k] for k in sorted(params) if k.startswith("d")]
        r = [params[k] for k in sorted(params) if k.startswith("r")]
        return PolynomialScalarModel(d, r, params["b"])

    @staticmethod
    def _poly(coeffs: FloatArray, u: FloatArray, order: int) -> FloatArray:
        c = coeffs
        for _ in range(order):
            c = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
        return np.asarray(np.polynomial.polynomial.polyval(u, c), dtype=float)

    def diffusion(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        return self._poly(self._d, u[0], 0)[np.newaxis, np.newaxis] * np.ones((1, 1) + u.shape[1:])

    def diffusion_jacobian(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        return self._poly(self._d, u[0], 1)[np.newaxis, np.newaxis, np.newaxis] * np.ones(
            (1, 1, 1) + u.shape[1:]
        )

    def diffusion_hessian(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        return self._poly(self._d, u[0], 2)[
            np.newaxis, np.newaxis, np.newaxis, np.newaxis
        ] * np.ones((1, 1, 1, 1) + u.shape[1:])

    def reaction(self, u: FloatArray, p: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        p = np.asarray(p, dtype=float)
        return (self._poly(self._r, u[0], 0) + self.params["b"] * p[0])[np.newaxis]

    def reaction_jacobians(
        self, u: FloatArray, p: FloatArray
    ) -> Tuple[FloatArray, FloatArray]:
        u = np.asarray(u, dtype=float)
        d1 = self._poly(self._r, u[0], 1)[np.newaxis, np.newaxis] * np.ones((1, 1) + u.shape[1:])
        d2 = np.full((1, 1) + u.shape[1:], self.params["b"])
        return d1, d2

    def in_domain(self, u: FloatArray) -> BoolArray:
        u = np.asarray(u, dtype=float)
        return np.asarray(self._poly(self._d, u[0], 0) > 0.0)


def make_scalar(
    diffusion: Sequence[float] = (1.0,),
    reaction: Sequence[float] = (0.0,),
    advection: float = 0.0,
) -> PolynomialScalarModel:
    if len(diffusion) == 0:
        raise ValueError("diffusion polynomial needs at least one coefficient")
    return PolynomialScalarModel(diffusion, reaction or (0.0,), advection)


def _as_state(m: ModelSpec, u: Sequence[float]) -> FloatArray:
    arr = np.asarray(u, dtype=float)
    if arr.shape != (m.n_species,):
        raise ValueError(f"expected a state of shape ({m.n_species},), got {arr.shape}")
    return arr


def eval_diffusion(m: ModelSpec, u: Sequence[float]) -> FloatArray:
    state = _as_state(m, u)
    if not m.domain_predicate(state):
        raise ParabolicityError(
            f"state {state.tolist()} is outside the parabolic region of {m!r}",
            state=state.tolist(),
        )
    return m.diffusion(state)


def eval_reaction(m: ModelSpec, u: Sequence[float], p: Sequence[float]) -> FloatArray:
    state = _as_state(m, u)
    if not m.domain_predicate(state):
        raise ParabolicityError(
            f"state {state.tolist()} is outside the parabolic region of {m!r}",
            state=state.tolist(),
        )
    return m.reaction(state, _as_state(m, p))


def check_parabolic(m: ModelSpec, u: Sequence[float]) -> bool:
    state = _as_state(m, u)
    if not np.all(np.isfinite(state)) or not m.domain_predicate(state):
        return False
    a = m.diffusion(state)
    sym = 0.5 * (a + a.T)
    return bool(linalg.eigvalsh(sym)[0] > 0.0)


@dataclasses.dataclass
class LinearizationCoefficients:
    """Coefficients of ``L v = alpha v_xx + beta v_x + gamma v``.

    ``alpha``, ``beta`` and ``gamma`` are stored mesh-first with shape
    ``(M, N, N)`` so that batched linear algebra applies directly.
    """

    x: FloatArray
    alpha: FloatArray
    beta: FloatArray
    gamma: FloatArray
    c: float
    period: Optional[float] = None

    @property
    def n_species(self) -> int:
        return int(self.alpha.shape[-1])

    def at(self, x: float) -> Tuple[FloatArray, FloatArray, FloatArray]:
        """Coefficients at an arbitrary position (trigonometric or linear interpolation)."""
        from wavespec.numerics.linalg import PeriodicInterpolant

        hit = np.flatnonzero(np.isclose(self.x, x, rtol=0.0, atol=1e-14))
        if hit.size:
            j = int(hit[0])
            return self.alpha[j], self.beta[j], self.gamma[j]
        n = self.n_species
        stacked = np.concatenate(
            [
                self.alpha.reshape(-1, n * n),
                self.beta.reshape(-1, n * n),
                self.gamma.reshape(-1, n * n),
            ],
            axis=1,
        ).T
        if self.period is not None:
            vals = PeriodicInterpolant(stacked, self.period)(np.array([x]))[:, 0]
        else:
            vals = np.array([np.interp(x, self.x, row) for row in stacked])
        a, b, g = np.split(vals, 3)
        return a.reshape(n, n), b.reshape(n, n), g.reshape(n, n)


def coefficient_fields(
    m: ModelSpec, u: FloatArray, ux: FloatArray, uxx: FloatArray, c: float
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """Species-first ``(N, N, M)`` coefficient fields along a sampled profile."""
    n = m.n_species
    a = m.diffusion(u)
    da = m.diffusion_jacobian(u)
    ha = m.diffusion_hessian(u)
    d1, d2 = m.reaction_jacobians(u, ux)
    eye = np.eye(n)[:, :, np.newaxis]
    beta = (
        np.einsum("imlx,lx->imx", da, ux)
        + np.einsum("ijmx,jx->imx", da, ux)
        + c * eye
        + d2
    )
    gamma = (
        np.einsum("ijmlx,lx,jx->imx", ha, ux, ux)
        + np.einsum("ijmx,jx->imx", da, uxx)
        + d1
    )
    return a, beta, gamma


def linearization_coefficients(
    m: ModelSpec, profile: "WaveProfile"
) -> LinearizationCoefficients:
    if profile.uxx is None:
        raise ValueError(
            "profile has no second-derivative samples; call "
            "WaveProfile.with_derivatives() or densify the mesh first"
        )
    u, ux, uxx = profile.u, profile.ux, profile.uxx
    bad = ~m.in_domain(u)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise ParabolicityError(
            f"profile leaves the parabolic region at x={profile.x[j]:.6g}",
            location=float(profile.x[j]),
            index=j,
            state=u[:, j].tolist(),
        )
    a, beta, gamma = coefficient_fields(m, u, ux, uxx, profile.c)
    period = profile.L if profile.kind == "wavetrain" else None
    return LinearizationCoefficients(
        x=np.asarray(profile.x, dtype=float),
        alpha=np.moveaxis(a, -1, 0),
        beta=np.moveaxis(beta, -1, 0),
        gamma=np.moveaxis(gamma, -1, 0),
        c=float(profile.c),
        period=period,
    )
