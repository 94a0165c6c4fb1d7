import numpy as np
import pytest

from wavespec.equilibria import Equilibrium
from wavespec.errors import ParabolicityError
from wavespec.model import GSKModel, PolynomialScalarModel, make_scalar
from wavespec.numerics.continuation import StepControl
from wavespec.wavetrain import (
    WaveProfile,
    branch_segments,
    comoving_rhs,
    continue_branch,
    detect_fold,
    harmonic_guess,
    profile_at,
    solve_wavetrain,
)


@pytest.fixture()
def allen_cahn() -> PolynomialScalarModel:
    """``u_t = u_xx + u - u^3``: stationary periodic patterns exist for ``L > 2 pi``."""
    return make_scalar(diffusion=[1.0], reaction=[0.0, 1.0, 0.0, -1.0])


def guess_for(m: PolynomialScalarModel, L: float, amplitude: float) -> WaveProfile:
    eq = Equilibrium(np.array([0.0]), dict(m.params), "zero")
    return harmonic_guess(m, eq, 2.0 * np.pi / L, np.array([1.0]), amplitude)


def energy(profile: WaveProfile) -> np.ndarray:
    u, ux = profile.u[0], profile.ux[0]
    return 0.5 * ux**2 + 0.5 * u**2 - 0.25 * u**4


def test_comoving_rhs(gsk: GSKModel) -> None:
    m = make_scalar(diffusion=[1.0], reaction=[0.0, 1.0])
    rhs = comoving_rhs(m, 0.5)
    y = np.array([[1.0], [2.0]])
    np.testing.assert_allclose(rhs(np.zeros(1), y, np.empty(0)), [[2.0], [-2.0]])
    np.testing.assert_allclose(rhs(np.zeros(1), y, np.array([0.0])), [[2.0], [-1.0]])
    with pytest.raises(ParabolicityError):
        comoving_rhs(gsk, 0.0)(np.zeros(1), np.array([[-0.1], [1.0], [0.0], [0.0]]), np.empty(0))


def test_harmonic_guess(allen_cahn: PolynomialScalarModel) -> None:
    guess = guess_for(allen_cahn, 8.0, 0.1)
    assert guess.L == pytest.approx(8.0)
    assert guess.amplitude == pytest.approx(0.2, rel=1e-3)
    assert float(np.mean(guess.u)) == pytest.approx(0.0, abs=1e-12)
    assert guess.mesh.n_nodes == 128


def test_trivial_guess_returns_equilibrium(bistable: PolynomialScalarModel) -> None:
    eq = Equilibrium(np.array([0.95]), dict(bistable.params), "near one")
    guess = harmonic_guess(bistable, eq, 1.0, np.array([1.0]), amplitude=0.0)
    profile = solve_wavetrain(bistable, guess.L, guess)
    assert profile.trivial
    np.testing.assert_allclose(profile.u, 1.0, atol=1e-10)


def test_stationary_pattern(allen_cahn: PolynomialScalarModel) -> None:
    profile = solve_wavetrain(allen_cahn, 8.0, guess_for(allen_cahn, 8.0, 0.7))
    assert not profile.trivial
    assert profile.L == pytest.approx(8.0)
    assert profile.c == pytest.approx(0.0, abs=1e-8)
    assert 0.5 < profile.s_max_w < 1.0
    assert np.ptp(energy(profile)) < 1e-6
    assert profile.uxx is not None


def test_branch_in_wavelength(allen_cahn: PolynomialScalarModel) -> None:
    start = solve_wavetrain(allen_cahn, 8.0, guess_for(allen_cahn, 8.0, 0.7))
    branch = continue_branch(
        allen_cahn,
        start,
        (7.5, 9.5),
        step=StepControl(h0=0.1, hmax=0.3, newton_tol=1e-9),
    )
    params = branch.parameters
    assert params[0] == pytest.approx(8.0)
    assert np.all(np.diff(params) > 0.0)
    assert params[-1] >= 9.0
    assert np.all(np.diff(branch.measures) > 0.0)
    assert detect_fold(branch) == []
    assert branch_segments(branch) == [(0, len(branch) - 1)]

    profile = profile_at(branch, 9.0)
    assert profile.L == pytest.approx(9.0)
    assert np.ptp(energy(profile)) < 1e-6
    with pytest.raises(ValueError, match="segment"):
        profile_at(branch, 9.0, segment=1)
    with pytest.raises(ValueError, match="not on segment"):
        profile_at(branch, 20.0)
