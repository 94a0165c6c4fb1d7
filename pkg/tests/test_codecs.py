from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import pytest

from wavespec.coder import CsvCoder, CsvTable, JsonCoder, PickleCoder
from wavespec.config import ModelConfig
from wavespec.key_builder import canonical, default_key_builder
from wavespec.model import make_gsk


@dataclass
class Sample:
    name: str
    value: float
    note: Optional[str] = None


@pytest.mark.parametrize(
    "value",
    [
        1,
        "some_string",
        (1, 2),
        {"some_key": 1, "other_key": 2},
        Sample(name="foo", value=42.0, note="some dataclass item"),
        ModelConfig(A=0.3),
    ],
)
def test_pickle_coder(value: Any) -> None:
    encoded_value = PickleCoder.encode(value)
    assert isinstance(encoded_value, bytes)
    assert PickleCoder.decode(encoded_value) == value


def test_pickle_coder_keeps_models() -> None:
    m = make_gsk(0.5, 0.2, 0.2, 0.001)
    assert PickleCoder.decode(PickleCoder.encode(m)) == m


def test_json_coder_complex_and_arrays() -> None:
    payload = {
        "lam": 0.25 - 1.5j,
        "grid": np.array([0.0, 0.5, 1.0]),
        "modes": np.array([1.0 + 2.0j, -3.0j]),
        "flag": np.bool_(True),
        "count": np.int64(3),
    }
    decoded = JsonCoder.decode(JsonCoder.encode(payload))
    assert decoded["lam"] == 0.25 - 1.5j
    np.testing.assert_array_equal(decoded["grid"], payload["grid"])
    np.testing.assert_array_equal(decoded["modes"], payload["modes"])
    assert decoded["flag"] is True
    assert decoded["count"] == 3


def test_json_coder_unknown_type() -> None:
    with pytest.raises(TypeError):
        JsonCoder.decode(b'{"_spec_type": "quaternion", "val": [1, 2, 3, 4]}')


def test_csv_coder_layout() -> None:
    table = CsvTable(
        ["kappa", "re_lambda", "stable"],
        [[0.1, 1.0 / 3.0, True], [0.2, -2.5e-12, False]],
        provenance="config=abc wavespec=0.1.0",
        comments=["L=6.0"],
    )
    text = CsvCoder.encode(table).decode()
    lines = text.splitlines()
    assert lines[0] == "# provenance: config=abc wavespec=0.1.0"
    assert lines[1] == "# L=6.0"
    assert lines[2] == "kappa,re_lambda,stable"
    assert lines[3].split(",")[2] == "1"

    decoded = CsvCoder.decode(text.encode())
    assert decoded.provenance == "config=abc wavespec=0.1.0"
    assert decoded.comments == ["L=6.0"]
    assert decoded.column("re_lambda") == [1.0 / 3.0, -2.5e-12]


def test_csv_coder_rejects_ragged_rows() -> None:
    with pytest.raises(ValueError, match="cells"):
        CsvCoder.encode(CsvTable(["a", "b"], [[1.0]]))


def test_csv_coder_rejects_complex_cells() -> None:
    with pytest.raises(TypeError):
        CsvCoder.encode(CsvTable(["lam"], [[1.0 + 1.0j]]))


def test_canonical_is_stable() -> None:
    a = {"L": 6.0, "grid": np.linspace(0.0, 1.0, 5)}
    b = {"grid": np.linspace(0.0, 1.0, 5), "L": 6.0}
    assert canonical(a) == canonical(b)
    assert canonical(make_gsk(0.5, 0.2, 0.2, 0.001)) == canonical(make_gsk(0.5, 0.2, 0.2, 0.001))
    assert canonical(make_gsk(0.5, 0.2, 0.2, 0.001)) != canonical(make_gsk(0.51, 0.2, 0.2, 0.001))


def test_default_key_builder() -> None:
    def solve(L: float) -> float:
        return L

    key = default_key_builder(solve, "wavespec:branch", args=(6.0,), kwargs={})
    assert key.startswith("wavespec:branch:")
    assert key == default_key_builder(solve, "wavespec:branch", args=(6.0,), kwargs={})
    assert key != default_key_builder(solve, "wavespec:branch", args=(6.1,), kwargs={})
