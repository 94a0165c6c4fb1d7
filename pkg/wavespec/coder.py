import csv
import io
import json
import pickle  # nosec:B403
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

CONVERTERS: Dict[str, Callable[[Any], Any]] = {
    "complex": lambda x: complex(x[0], x[1]),
    "ndarray": lambda x: np.asarray(x),
    "complex_ndarray": lambda x: np.asarray(x[0]) + 1j * np.asarray(x[1]),
}


class JsonEncoder(json.JSONEncoder):
    def default(self, o: Any) -> Any:
        if isinstance(o, (complex, np.complexfloating)):
            return {"val": [o.real, o.imag], "_spec_type": "complex"}
        elif isinstance(o, np.ndarray):
            if np.iscomplexobj(o):
                return {
                    "val": [o.real.tolist(), o.imag.tolist()],
                    "_spec_type": "complex_ndarray",
                }
            return {"val": o.tolist(), "_spec_type": "ndarray"}
        elif isinstance(o, np.bool_):
            return bool(o)
        elif isinstance(o, np.integer):
            return int(o)
        elif isinstance(o, np.floating):
            return float(o)
        else:
            return super().default(o)


def object_hook(obj: Any) -> Any:
    _spec_type = obj.get("_spec_type")
    if not _spec_type:
        return obj

    if _spec_type in CONVERTERS:
        return CONVERTERS[_spec_type](obj["val"])
    else:
        raise TypeError(f"Unknown {_spec_type}")


class Coder:
    @classmethod
    def encode(cls, value: Any) -> bytes:
        raise NotImplementedError

    @classmethod
    def decode(cls, value: bytes) -> Any:
        raise NotImplementedError


class JsonCoder(Coder):
    @classmethod
    def encode(cls, value: Any) -> bytes:
        return json.dumps(value, cls=JsonEncoder, indent=2, sort_keys=True).encode()

    @classmethod
    def decode(cls, value: bytes) -> Any:
        # explicitly decode from UTF-8 bytes first, as otherwise
        # json.loads() will first have to detect the correct UTF-
        # encoding used.
        return json.loads(value.decode(), object_hook=object_hook)


class PickleCoder(Coder):
    @classmethod
    def encode(cls, value: Any) -> bytes:
        return pickle.dumps(value)

    @classmethod
    def decode(cls, value: bytes) -> Any:
        return pickle.loads(value)  # noqa: S301


@dataclass
class CsvTable:
    header: List[str]
    rows: List[Sequence[Any]] = field(default_factory=list)
    provenance: Optional[str] = None
    comments: List[str] = field(default_factory=list)

    def column(self, name: str) -> List[Any]:
        i = self.header.index(name)
        return [row[i] for row in self.rows]


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (complex, np.complexfloating)):
        raise TypeError("complex values must be split into real and imaginary columns")
    return str(value)


def _parse_cell(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


class CsvCoder(Coder):
    """Plot-ready CSV with a ``# provenance`` comment line and a header row.

    Floats are written with 17 significant digits so that every value
    round-trips exactly.
    """

    @classmethod
    def encode(cls, value: Any) -> bytes:
        if not isinstance(value, CsvTable):
            raise TypeError(f"CsvCoder encodes CsvTable, got {type(value).__name__}")
        buf = io.StringIO()
        if value.provenance is not None:
            buf.write(f"# provenance: {value.provenance}\n")
        for comment in value.comments:
            buf.write(f"# {comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(value.header)
        for row in value.rows:
            if len(row) != len(value.header):
                raise ValueError(
                    f"row has {len(row)} cells, header has {len(value.header)}"
                )
            writer.writerow([format_cell(v) for v in row])
        return buf.getvalue().encode()

    @classmethod
    def decode(cls, value: bytes) -> CsvTable:
        lines = value.decode().splitlines()
        provenance = None
        comments: List[str] = []
        body: List[str] = []
        for line in lines:
            if line.startswith("# provenance:"):
                provenance = line[len("# provenance:") :].strip()
            elif line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                body.append(line)
        reader = csv.reader(body)
        header = next(reader)
        rows: List[Sequence[Any]] = [[_parse_cell(c) for c in row] for row in reader]
        return CsvTable(header=header, rows=rows, provenance=provenance, comments=comments)
