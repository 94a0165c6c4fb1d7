import numpy as np
import pytest

from wavespec.equilibria import Equilibrium
from wavespec.errors import PositivityError
from wavespec.model import GSKModel, PolynomialScalarModel, make_gsk, make_scalar
from wavespec.numerics.newton import fd_jacobian
from wavespec.simulate import (
    SimState,
    default_nodes,
    discretize,
    fourier_mode,
    grid,
    growth_experiment,
    integrate,
    orbital_distance,
    semidiscrete_jacobian,
    semidiscrete_rhs,
    step,
)
from wavespec.types import FloatArray


def decay_error(scheme: str, dt: float) -> float:
    m = make_scalar(diffusion=[1.0], reaction=[0.0, -1.0])
    x = grid(1.0, 8)
    state = SimState(m, x, np.ones((1, 8)), scheme=scheme)
    for _ in range(int(round(1.0 / dt))):
        state = step(state, dt)
    return abs(float(state.u[0, 0]) - np.exp(-1.0))


def test_default_nodes() -> None:
    assert default_nodes(6.0) == 512
    assert default_nodes(1.0) == 512
    assert default_nodes(12.2) == 1024


def test_equilibrium_is_fixed(gsk: GSKModel) -> None:
    eq = Equilibrium(np.array([1.0, 0.0]), dict(gsk.params), "desert")
    base = discretize(gsk, eq, 2.0 * np.pi, 64)
    np.testing.assert_allclose(semidiscrete_rhs(gsk, 0.0, base.u, base.h), 0.0, atol=1e-14)
    state = integrate(SimState(gsk, base.x, base.u, scheme="trbdf2"), 1.0)
    np.testing.assert_allclose(state.u, base.u, atol=1e-12)


def test_porous_medium_flux() -> None:
    m = make_gsk(0.0, 0.2, 0.0, 0.001)
    x = grid(2.0 * np.pi, 256)
    u = np.stack([1.0 + 0.5 * np.sin(x), np.zeros_like(x)])
    rhs = semidiscrete_rhs(m, 0.0, u, x[1] - x[0])
    # (w^2)_xx for w = 1 + sin(x) / 2
    np.testing.assert_allclose(rhs[0], -np.sin(x) + 0.5 * np.cos(2.0 * x), atol=1e-3)
    np.testing.assert_allclose(rhs[1], 0.0, atol=1e-14)


def test_jacobian_matches_finite_differences() -> None:
    m = make_gsk(0.5, 0.2, 0.2, 0.001)
    x = grid(2.0 * np.pi, 16)
    u = np.stack([1.0 + 0.3 * np.cos(x), 0.5 + 0.2 * np.sin(2.0 * x)])
    h = float(x[1] - x[0])

    def flat(z: FloatArray) -> FloatArray:
        return semidiscrete_rhs(m, 0.3, z.reshape(u.shape), h).ravel()

    exact = semidiscrete_jacobian(m, 0.3, u, h).toarray()
    np.testing.assert_allclose(exact, fd_jacobian(flat, u.ravel()), atol=1e-5)


def test_heat_decay() -> None:
    heat = make_scalar(diffusion=[1.0])
    x = grid(2.0 * np.pi, 64)
    state = SimState(heat, x, np.sin(x)[np.newaxis], scheme="euler")
    for _ in range(1000):
        state = step(state, 1e-3)
    amplitude = float(np.max(np.abs(state.u)))
    assert amplitude == pytest.approx(np.exp(-1.0), rel=0.02)
    assert state.t == pytest.approx(1.0)
    assert len(state.monitors["t"]) == 1000


def test_euler_is_first_order() -> None:
    ratio = decay_error("euler", 0.02) / decay_error("euler", 0.01)
    assert ratio == pytest.approx(2.0, abs=0.1)


def test_trbdf2_is_second_order() -> None:
    ratio = decay_error("trbdf2", 0.02) / decay_error("trbdf2", 0.01)
    assert ratio == pytest.approx(4.0, abs=0.3)


def test_adaptive_integration() -> None:
    m = make_scalar(diffusion=[1.0], reaction=[0.0, -1.0])
    x = grid(1.0, 8)
    state = integrate(SimState(m, x, np.ones((1, 8)), scheme="trbdf2"), 2.0, rtol=1e-8, atol=1e-12)
    assert state.t == pytest.approx(2.0)
    assert state.u[0, 0] == pytest.approx(np.exp(-2.0), rel=1e-5)


def test_observer_stops_early() -> None:
    m = make_scalar(diffusion=[1.0], reaction=[0.0, -1.0])
    x = grid(1.0, 8)
    state = integrate(
        SimState(m, x, np.ones((1, 8))), 10.0, observer=lambda s: s.t > 0.5
    )
    assert 0.5 < state.t < 10.0


def test_positivity_loss(gsk: GSKModel) -> None:
    x = grid(2.0 * np.pi, 32)
    u = np.stack([np.cos(x), np.ones_like(x)])
    with pytest.raises(PositivityError) as info:
        integrate(SimState(gsk, x, u), 1.0)
    assert info.value.report["min_w"] <= 0.0
    assert np.pi / 2 <= info.value.report["location"] <= 3 * np.pi / 2
    with pytest.raises(PositivityError):
        step(SimState(gsk, x, u), 1e-3)


def test_unknown_scheme(heat: PolynomialScalarModel) -> None:
    with pytest.raises(ValueError, match="scheme"):
        SimState(heat, grid(1.0, 8), np.zeros((1, 8)), scheme="rk4")


def test_orbital_distance_ignores_translation() -> None:
    x = grid(2.0 * np.pi, 128)
    h = float(x[1] - x[0])
    base = np.stack([np.exp(np.cos(x))])
    shifted = np.roll(base, 7, axis=1)
    dist, shift = orbital_distance(shifted, base, h)
    assert dist == pytest.approx(0.0, abs=1e-12)
    assert shift == pytest.approx(7 * h)
    dist, _ = orbital_distance(base + 1e-3, base, h)
    assert dist == pytest.approx(1e-3 * np.sqrt(2.0 * np.pi), rel=1e-6)


def test_growth_rate_of_unstable_state() -> None:
    # u_t = u_xx + (u - 1): the state u = 1 has lambda = 1 - kappa^2
    m = make_scalar(diffusion=[1.0], reaction=[-1.0, 1.0])
    eq = Equilibrium(np.array([1.0]), dict(m.params), "one")
    length = 4.0 * np.pi
    base = discretize(m, eq, length, 128)
    mode, lam = fourier_mode(m, eq, 0.5, base.x, length)
    assert lam == pytest.approx(0.75)
    result = growth_experiment(m, base, mode, T=40.0, predicted=lam)
    assert result.success
    assert result.relative_error is not None
    assert result.relative_error < 0.01
    assert result.q[-1] > 0.1 * base.l2


def test_fourier_mode_needs_whole_periods() -> None:
    m = make_scalar(diffusion=[1.0], reaction=[-1.0, 1.0])
    x = grid(5.0, 64)
    with pytest.raises(ValueError, match="multiple"):
        fourier_mode(m, np.array([1.0]), 0.5, x, 5.0)
