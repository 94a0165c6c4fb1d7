import numpy as np
import pytest
from scipy import sparse

from wavespec.errors import NoConvergenceError, SingularJacobianError, StiffnessError
from wavespec.numerics.collocation import MeshFunction, solve_periodic_bvp
from wavespec.numerics.continuation import StepControl, arclength_continue
from wavespec.numerics.ivp import integrate_ivp
from wavespec.numerics.linalg import (
    PeriodicInterpolant,
    central_derivative,
    differentiation_matrix,
    eig_dense,
    spectral_derivative,
)
from wavespec.numerics.newton import fd_jacobian, newton_solve, solve_linear
from wavespec.types import FloatArray


def test_newton_quadratic() -> None:
    def residual(x: FloatArray) -> FloatArray:
        return np.array([x[0] ** 2 - 2.0, x[0] * x[1] - 1.0])

    result = newton_solve(residual, [1.0, 1.0], tol=1e-13)
    assert result.x[0] == pytest.approx(np.sqrt(2.0))
    assert result.x[1] == pytest.approx(1.0 / np.sqrt(2.0))
    assert result.history[-1] <= 1e-13
    assert result.iterations == len(result.history) - 1


def test_newton_reports_failure() -> None:
    def residual(x: FloatArray) -> FloatArray:
        return np.array([x[0] ** 2 + 1.0])

    with pytest.raises(NoConvergenceError) as info:
        newton_solve(residual, [0.5], max_iter=5)
    assert info.value.history


def test_fd_jacobian() -> None:
    def residual(x: FloatArray) -> FloatArray:
        return np.array([np.sin(x[0]) * x[1], x[1] ** 3])

    x = np.array([0.3, 2.0])
    expected = np.array([[np.cos(0.3) * 2.0, np.sin(0.3)], [0.0, 12.0]])
    np.testing.assert_allclose(fd_jacobian(residual, x), expected, rtol=1e-6, atol=1e-6)


def test_solve_linear_variants() -> None:
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    np.testing.assert_allclose(solve_linear(a, b), np.linalg.solve(a, b))
    np.testing.assert_allclose(solve_linear(sparse.csr_matrix(a), b), np.linalg.solve(a, b))
    with pytest.raises(SingularJacobianError):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), b)
    wide = np.array([[1.0, 1.0]])
    np.testing.assert_allclose(solve_linear(wide, np.array([2.0])), [1.0, 1.0])


def test_eig_dense() -> None:
    pairs = eig_dense(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert sorted(pairs.values.imag) == pytest.approx([-1.0, 1.0])
    for lam, v in pairs.pairs():
        np.testing.assert_allclose(np.array([[0.0, -1.0], [1.0, 0.0]]) @ v, lam * v, atol=1e-12)
    with pytest.raises(ValueError):
        eig_dense(np.ones((2, 3)))


def test_spectral_derivative() -> None:
    period = 2.0 * np.pi
    x = np.arange(32) * period / 32
    np.testing.assert_allclose(spectral_derivative(np.sin(3 * x), period), 3 * np.cos(3 * x), atol=1e-10)
    np.testing.assert_allclose(
        spectral_derivative(np.sin(3 * x), period, order=2), -9 * np.sin(3 * x), atol=1e-9
    )
    d = differentiation_matrix(32, period)
    np.testing.assert_allclose((d @ np.sin(3 * x)).real, 3 * np.cos(3 * x), atol=1e-10)


@pytest.mark.parametrize(
    ("shift", "order", "complex_modes"),
    [(0.25, 1, False), (0.25, 2, False), (0.0, 2, False), (0.0, 1, True)],
)
def test_differentiation_matrix_symbols(shift: float, order: int, complex_modes: bool) -> None:
    d = differentiation_matrix(32, 2.0 * np.pi, shift, order, complex_modes)
    symbols = (1j * (np.arange(-16, 16) + shift)) ** order
    dist = np.abs(np.linalg.eigvals(d)[:, np.newaxis] - symbols[np.newaxis, :])
    assert np.max(dist.min(axis=0)) < 1e-9
    assert np.max(dist.min(axis=1)) < 1e-9


def test_periodic_interpolant() -> None:
    period = 4.0
    x = np.arange(16) * period / 16
    samples = np.stack([np.cos(2 * np.pi * x / period), np.sin(4 * np.pi * x / period)])
    interp = PeriodicInterpolant(samples, period)
    xs = np.array([0.13, 1.7, 3.99])
    np.testing.assert_allclose(
        interp(xs),
        np.stack([np.cos(2 * np.pi * xs / period), np.sin(4 * np.pi * xs / period)]),
        atol=1e-12,
    )
    np.testing.assert_allclose(
        interp.derivative(xs)[0], -2 * np.pi / period * np.sin(2 * np.pi * xs / period), atol=1e-11
    )


def test_central_derivative() -> None:
    x = np.linspace(0.0, 1.0, 201)
    np.testing.assert_allclose(central_derivative(x**2, x), 2 * x, atol=1e-10)


def test_integrate_ivp() -> None:
    result = integrate_ivp(lambda t, y: -y, (0.0, 1.0), [1.0])
    assert result.y_end[0] == pytest.approx(np.exp(-1.0), rel=1e-9)
    complex_result = integrate_ivp(lambda t, y: 1j * y, (0.0, np.pi), [1.0 + 0j])
    assert complex_result.y_end[0] == pytest.approx(-1.0, abs=1e-8)


def test_integrate_ivp_end_value_with_samples() -> None:
    result = integrate_ivp(lambda t, y: -y, (0.0, 2.0), [1.0], t_eval=np.array([0.0, 0.5, 1.0]))
    assert result.y_end[0] == pytest.approx(np.exp(-2.0), rel=1e-8)
    np.testing.assert_allclose(result.x, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(result.y[0], np.exp(-result.x), rtol=1e-8)


def test_integrate_ivp_blowup() -> None:
    with pytest.raises(StiffnessError):
        integrate_ivp(lambda t, y: y**2, (0.0, 2.0), [1.0])


def test_mesh_function() -> None:
    period = 2.0
    mesh = MeshFunction.uniform(np.sin(np.pi * np.arange(40) * period / 40)[np.newaxis], period)
    assert mesh.n_nodes == 40
    assert mesh(np.array([2.5]))[0, 0] == pytest.approx(np.sin(np.pi * 0.5), abs=1e-4)
    assert mesh.rescaled(4.0).period == 4.0
    with pytest.raises(ValueError):
        MeshFunction(np.array([0.0, 1.0]), np.zeros((1, 2)), 2.0)


def test_limit_cycle_collocation() -> None:
    # x' = x - w y - x r^2, y' = w x + y - y r^2 has the unit circle as limit cycle
    def rhs(x: FloatArray, y: FloatArray, theta: FloatArray) -> FloatArray:
        w = theta[0]
        r2 = y[0] ** 2 + y[1] ** 2
        return np.stack([y[0] - w * y[1] - y[0] * r2, w * y[0] + y[1] - y[1] * r2])

    period = 2.0 * np.pi
    nodes = np.arange(64) * period / 64
    guess = MeshFunction.uniform(0.8 * np.stack([np.cos(nodes), np.sin(nodes)]), period)
    solution = solve_periodic_bvp(rhs, period, guess, mu=0.9)
    radius = np.hypot(*solution.mesh.values)
    np.testing.assert_allclose(radius, 1.0, atol=1e-3)
    assert solution.theta[0] == pytest.approx(1.0, abs=1e-3)


def test_arclength_passes_fold() -> None:
    def residual(z: FloatArray) -> FloatArray:
        return np.array([z[0] ** 2 + z[1] ** 2 - 1.0])

    branch = arclength_continue(
        residual,
        np.array([1.0, 0.0]),
        step=StepControl(h0=0.05, hmax=0.2, max_steps=30, newton_tol=1e-12),
        p_range=(-2.0, 2.0),
    )
    folds = branch.folds()
    assert folds
    assert folds[0].parameter == pytest.approx(1.0, abs=1e-5)
    assert np.all(np.abs(np.hypot(*np.stack([p.state for p in branch.points]).T) - 1.0) < 1e-10)
