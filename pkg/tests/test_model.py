import numpy as np
import pytest

from wavespec.errors import ParabolicityError, ParameterDomainError
from wavespec.model import (
    GSKModel,
    PolynomialScalarModel,
    check_parabolic,
    coefficient_fields,
    eval_diffusion,
    eval_reaction,
    make_gsk,
    make_scalar,
)


def test_gsk_reaction(gsk: GSKModel) -> None:
    f = eval_reaction(gsk, [0.5, 2.0], [0.1, 0.0])
    # C w_x + A (1 - w) - w v^2 and -B v + w v^2
    assert f[0] == pytest.approx(0.2 * 0.1 + 0.5 * 0.5 - 0.5 * 4.0)
    assert f[1] == pytest.approx(-0.2 * 2.0 + 0.5 * 4.0)


def test_gsk_diffusion(gsk: GSKModel) -> None:
    a = eval_diffusion(gsk, [0.5, 2.0])
    np.testing.assert_allclose(a, [[1.0, 0.0], [0.0, 0.001]])
    assert check_parabolic(gsk, [0.5, 2.0])
    assert not check_parabolic(gsk, [0.0, 2.0])
    with pytest.raises(ParabolicityError):
        eval_diffusion(gsk, [-0.1, 2.0])


def test_gsk_validation() -> None:
    with pytest.raises(ValueError, match="D > 0"):
        make_gsk(0.5, 0.2, 0.2, 0.0)
    with pytest.raises(ValueError):
        make_gsk(-0.5, 0.2, 0.2, 0.001)


def test_parameter_domain(gsk: GSKModel) -> None:
    with pytest.raises(ParameterDomainError) as info:
        gsk.with_params(A=-0.003)
    assert info.value.parameter == "A"
    assert info.value.details()["value"] == -0.003
    assert gsk.parameter_bounds("A") == (0.0, np.inf)
    assert gsk.parameter_bounds("C") == (-np.inf, np.inf)
    assert make_scalar().parameter_bounds("r00") == (-np.inf, np.inf)


def test_with_params(gsk: GSKModel) -> None:
    other = gsk.with_params(A=0.43)
    assert other.params["A"] == 0.43
    assert gsk.params["A"] == 0.5
    assert other != gsk
    assert other == make_gsk(0.43, 0.2, 0.2, 0.001)
    with pytest.raises(KeyError):
        gsk.with_params(E=1.0)


def test_params_are_read_only(gsk: GSKModel) -> None:
    with pytest.raises(TypeError):
        gsk.params["A"] = 1.0  # type: ignore[index]


def test_scalar_polynomials() -> None:
    m = make_scalar(diffusion=[1.0, 2.0], reaction=[0.0, 1.0, -1.0], advection=0.5)
    u = np.array([[0.5]])
    assert m.diffusion(u)[0, 0, 0] == pytest.approx(2.0)
    assert m.diffusion_jacobian(u)[0, 0, 0, 0] == pytest.approx(2.0)
    assert m.reaction(u, np.array([[1.0]]))[0, 0] == pytest.approx(0.25 + 0.5)
    d1, d2 = m.reaction_jacobians(u, np.array([[1.0]]))
    assert d1[0, 0, 0] == pytest.approx(0.0)
    assert d2[0, 0, 0] == pytest.approx(0.5)


def test_scalar_with_params(bistable: PolynomialScalarModel) -> None:
    shifted = bistable.with_params(r01=-0.4)
    assert shifted.params["r01"] == -0.4
    assert shifted.params["r02"] == bistable.params["r02"]


def test_coefficients_at_constant_state(gsk: GSKModel) -> None:
    u = np.array([[0.5, 0.5], [2.0, 2.0]])
    zero = np.zeros_like(u)
    a, beta, gamma = coefficient_fields(gsk, u, zero, zero, c=0.3)
    np.testing.assert_allclose(a[:, :, 0], [[1.0, 0.0], [0.0, 0.001]])
    np.testing.assert_allclose(beta[:, :, 0], [[0.3 + 0.2, 0.0], [0.0, 0.3]])
    d1, _ = gsk.reaction_jacobians(u, zero)
    np.testing.assert_allclose(gamma, d1)


def test_coefficients_with_gradient() -> None:
    # (u^2 u_x)_x linearizes to u^2 v_xx + 4 u u_x v_x + (2 u_x^2 + 2 u u_xx) v
    m = make_scalar(diffusion=[0.0, 0.0, 1.0])
    u, ux, uxx = np.array([[2.0]]), np.array([[0.5]]), np.array([[-1.0]])
    a, beta, gamma = coefficient_fields(m, u, ux, uxx, c=0.0)
    assert a[0, 0, 0] == pytest.approx(4.0)
    assert beta[0, 0, 0] == pytest.approx(4.0 * 2.0 * 0.5)
    assert gamma[0, 0, 0] == pytest.approx(2.0 * 0.25 + 2.0 * 2.0 * -1.0)
