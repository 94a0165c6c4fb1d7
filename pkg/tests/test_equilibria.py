import numpy as np
import pytest

from wavespec.equilibria import (
    equilibria_for,
    find_equilibria,
    gsk_equilibria,
    saddle_node_threshold,
)
from wavespec.model import PolynomialScalarModel, make_gsk, make_scalar


def test_three_states_above_threshold() -> None:
    states = gsk_equilibria(0.5, 0.2)
    assert [e.label for e in states] == ["desert", "plus", "minus"]
    m = make_gsk(0.5, 0.2, 0.2, 0.001)
    for e in states:
        assert e.residual(m) < 1e-12
    plus, minus = states[1], states[2]
    assert plus.state[0] < minus.state[0]
    assert plus.state[0] * minus.state[0] == pytest.approx(0.04 / 0.5)


def test_desert_only_below_threshold() -> None:
    assert saddle_node_threshold(0.2) == pytest.approx(0.16)
    states = gsk_equilibria(0.1, 0.2)
    assert [e.label for e in states] == ["desert"]
    np.testing.assert_array_equal(states[0].state, [1.0, 0.0])


def test_coalescence_at_threshold() -> None:
    states = gsk_equilibria(0.16, 0.2)
    assert len(states) == 2
    assert states[1].fold_degenerate
    assert states[1].state[0] == pytest.approx(0.5)


def test_degenerate_b() -> None:
    states = gsk_equilibria(0.5, 0.0)
    assert len(states) == 1
    assert "B = 0" in states[0].note


def test_small_root_is_accurate() -> None:
    A, B = 1e6, 0.2
    plus = gsk_equilibria(A, B)[1]
    w = plus.state[0]
    assert abs(A * (1 - w) - w * (B / w) ** 2) / A < 1e-12


def test_invalid_parameters() -> None:
    with pytest.raises(ValueError):
        gsk_equilibria(-1.0, 0.2)


def test_generic_search(bistable: PolynomialScalarModel) -> None:
    states = find_equilibria(bistable, [(-0.5, 1.5)])
    roots = sorted(float(e.state[0]) for e in states)
    assert roots == pytest.approx([0.0, 0.3, 1.0], abs=1e-9)
    assert [e.label for e in states] == ["eq0", "eq1", "eq2"]


def test_equilibria_for_uses_closed_form() -> None:
    m = make_gsk(0.5, 0.2, 0.2, 0.001)
    states = equilibria_for(m)
    assert len(states) == 3
    assert all(e.parabolic for e in states)
    assert all(e.params["D"] == 0.001 for e in states)


def test_non_parabolic_states_are_flagged() -> None:
    # a(u) = u vanishes at the root u = 0
    m = make_scalar(diffusion=[0.0, 1.0], reaction=[0.0, 1.0, -1.0])
    states = equilibria_for(m)
    flags = {round(float(e.state[0]), 6): e.parabolic for e in states}
    assert flags[0.0] is False
    assert flags[1.0] is True
