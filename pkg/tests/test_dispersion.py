from typing import Tuple

import numpy as np
import pytest

from wavespec.dispersion import (
    critical_parameter,
    detect_turing_hopf,
    dispersion_matrix,
    gsk_family,
    kappa_grid,
    match_branches,
    max_growth,
    spectrum_homogeneous,
)
from wavespec.equilibria import Equilibrium
from wavespec.errors import BracketError
from wavespec.model import ModelSpec, PolynomialScalarModel, make_gsk, make_scalar


def test_heat_equation(heat: PolynomialScalarModel) -> None:
    kappas = kappa_grid(5.0, 101)
    curves = spectrum_homogeneous(heat, [0.0], 0.0, kappas)
    assert len(curves) == 1
    np.testing.assert_allclose(curves[0].lam.real, -(kappas**2), atol=1e-12)
    growth = max_growth(curves)
    assert growth.max_re_lambda == pytest.approx(0.0, abs=1e-12)
    assert growth.kappa_star == pytest.approx(0.0, abs=1e-12)


def test_advection_shifts_frequency() -> None:
    m = make_scalar(diffusion=[1.0], reaction=[0.0, 1.0], advection=0.5)
    lam = np.linalg.eigvals(dispersion_matrix(m, [0.0], 0.25, 2.0))
    assert lam[0] == pytest.approx(1.0 - 4.0 + 1j * 2.0 * 0.75)


def test_desert_is_stable() -> None:
    m = make_gsk(0.5, 0.2, 0.2, 0.001)
    curves = spectrum_homogeneous(m, [1.0, 0.0])
    growth = max_growth(curves)
    assert growth.max_re_lambda == pytest.approx(-0.2, abs=1e-9)


def test_conjugate_symmetry() -> None:
    m, eq = gsk_family(0.2, 0.2, 0.001)(0.43)
    for kappa in (0.3, 1.7, 4.0):
        plus = np.sort_complex(np.linalg.eigvals(dispersion_matrix(m, eq, 0.0, kappa)))
        minus = np.sort_complex(np.linalg.eigvals(dispersion_matrix(m, eq, 0.0, -kappa)))
        np.testing.assert_allclose(np.sort_complex(np.conj(minus)), plus, atol=1e-12)


def test_match_branches_follows_crossing() -> None:
    x = np.linspace(-1.0, 1.0, 41)
    values = np.stack([x + 0j, -x + 0j], axis=1)
    curves = match_branches(x, values)
    assert len(curves) == 2
    slopes = sorted(float(np.polyfit(c.kappa, c.lam.real, 1)[0]) for c in curves)
    assert slopes == pytest.approx([-1.0, 1.0])


def test_match_branches_splits_on_jumps() -> None:
    x = np.linspace(0.0, 1.0, 21)
    values = np.where(x < 0.5, 0.0, 5.0).astype(complex)[:, np.newaxis]
    curves = match_branches(x, values, jump_tol=0.1)
    assert len(curves) == 2


def test_figure_one_signs() -> None:
    family = gsk_family(0.2, 0.2, 0.001)
    stable = max_growth(spectrum_homogeneous(*family(0.63)))
    unstable = max_growth(spectrum_homogeneous(*family(0.43)))
    assert stable.max_re_lambda < 0.0
    assert unstable.max_re_lambda > 0.0
    assert unstable.kappa_star > 0.0


def test_turing_hopf_onset() -> None:
    family = gsk_family(0.2, 0.2, 0.001)
    onset = detect_turing_hopf(family, (0.43, 0.63), tol=1e-3)
    assert 0.43 < onset.theta < 0.63
    assert onset.kind == "turing_hopf"
    assert onset.kappa > 0.0
    assert onset.bracket[1] - onset.bracket[0] <= 1e-3


def test_turing_hopf_needs_sign_change() -> None:
    family = gsk_family(0.2, 0.2, 0.001)
    with pytest.raises(BracketError):
        detect_turing_hopf(family, (0.7, 0.9))


def test_critical_parameter_scalar() -> None:
    # lambda = theta - kappa^2 for u_t = u_xx + theta u
    def family(theta: float) -> Tuple[ModelSpec, Equilibrium]:
        m = make_scalar(diffusion=[1.0], reaction=[0.0, theta])
        return m, Equilibrium(np.array([0.0]), dict(m.params), "zero")

    assert critical_parameter(family, 2.0, (0.0, 10.0)) == pytest.approx(4.0)
    with pytest.raises(BracketError):
        critical_parameter(family, 2.0, (5.0, 10.0))


def test_missing_state() -> None:
    with pytest.raises(ValueError, match="does not exist"):
        gsk_family(0.2, 0.2, 0.001)(0.1)


@pytest.mark.parametrize("c", [0.3, -1.2])
def test_frame_speed_shifts_spectrum(c: float) -> None:
    m = make_gsk(0.43, 0.2, 0.2, 0.001)
    for kappa in (0.0, 0.7, 2.5):
        rest = np.sort_complex(np.linalg.eigvals(dispersion_matrix(m, [1.0, 0.0], 0.0, kappa)))
        moving = np.sort_complex(np.linalg.eigvals(dispersion_matrix(m, [1.0, 0.0], c, kappa)))
        np.testing.assert_allclose(moving, rest + 1j * kappa * c, atol=1e-10)
