"""Run configuration read from TOML files.

Every table is validated by a pydantic model that rejects unknown keys.
Defaults reproduce the published GSK parameter sets (``B = C = 0.2``,
``D = 0.001``).
"""
import hashlib
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union, get_args

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from wavespec.errors import ConfigError
from wavespec.model import ModelSpec, make_gsk, make_scalar

Task = Literal[
    "equilibria",
    "dispersion",
    "turing-hopf",
    "wavetrain",
    "bloch",
    "sideband",
    "evans",
    "simulate",
    "reproduce-paper",
]
TASKS: Tuple[str, ...] = get_args(Task)


def _ordered(pair: Tuple[float, float], name: str) -> Tuple[float, float]:
    if not pair[0] < pair[1]:
        raise ValueError(f"{name} must be ordered (lo < hi), got {pair}")
    return pair


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelConfig(Section):
    name: Literal["gsk", "scalar"] = "gsk"
    A: float = Field(0.02, ge=0.0)
    B: float = Field(0.2, ge=0.0)
    C: float = 0.2
    D: PositiveFloat = 0.001
    diffusion: List[float] = Field(default_factory=lambda: [1.0])
    reaction: List[float] = Field(default_factory=lambda: [0.0])
    advection: float = 0.0

    @field_validator("diffusion")
    @classmethod
    def _nonempty(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("diffusion needs at least one coefficient")
        return v

    def build(self, **overrides: float) -> ModelSpec:
        if self.name == "gsk":
            params = {"A": self.A, "B": self.B, "C": self.C, "D": self.D}
            params.update(overrides)
            return make_gsk(**params)
        m = make_scalar(self.diffusion, self.reaction, self.advection)
        return m.with_params(**overrides) if overrides else m


class DispersionConfig(Section):
    kappa_max: PositiveFloat = 20.0
    n_kappa: int = Field(601, ge=2)
    c: float = 0.0
    state: str = "plus"
    scan_A: List[float] = Field(default_factory=lambda: [0.43, 0.53, 0.63])
    onset_bracket: Tuple[float, float] = (0.43, 0.63)
    onset_tol: PositiveFloat = 1e-4
    jump_tol: PositiveFloat = 0.1

    @field_validator("onset_bracket")
    @classmethod
    def _bracket(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        return _ordered(v, "onset_bracket")


class WavetrainConfig(Section):
    L_seed: PositiveFloat = 6.0
    seed_bracket: Tuple[float, float] = (0.17, 2.0)
    seed_amplitude: PositiveFloat = 1e-2
    target_A: Optional[float] = 0.02
    L_range: Tuple[float, float] = (3.0, 80.0)
    n_nodes: int = Field(128, ge=16)
    max_nodes: int = Field(1024, ge=16)
    tol: PositiveFloat = 1e-9
    defect_tol: PositiveFloat = 1e-6
    step: PositiveFloat = 0.05
    step_max: PositiveFloat = 2.0
    profile_every: PositiveInt = 10

    @field_validator("seed_bracket", "L_range")
    @classmethod
    def _bracket(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        return _ordered(v, "bracket")

    @model_validator(mode="after")
    def _nodes(self) -> "WavetrainConfig":
        if self.max_nodes < self.n_nodes:
            raise ValueError("max_nodes must be at least n_nodes")
        if self.step_max < self.step:
            raise ValueError("step_max must be at least step")
        return self


class BlochConfig(Section):
    L_values: List[PositiveFloat] = Field(default_factory=lambda: [5.9, 5.98, 6.1])
    n_gamma: int = Field(64, ge=2)
    n_modes: PositiveInt = 40
    n_grid: Optional[int] = Field(None, ge=64)
    method: Literal["matrix", "monodromy", "both"] = "both"
    jump_tol: PositiveFloat = 0.1
    tol: PositiveFloat = 1e-10


class SidebandConfig(Section):
    L_bracket: Tuple[float, float] = (5.9, 6.1)
    tol: PositiveFloat = 1e-3
    kappa_fit: Optional[PositiveFloat] = None
    segment: Optional[int] = Field(None, ge=0)

    @field_validator("L_bracket")
    @classmethod
    def _bracket(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        return _ordered(v, "L_bracket")


class EvansConfig(Section):
    mu: float = Field(0.3, gt=0.0, lt=1.0)
    window: PositiveFloat = 30.0
    re_range: Tuple[float, float] = (-0.5, 0.5)
    im_range: Tuple[float, float] = (-0.5, 0.5)
    n_re: int = Field(11, ge=2)
    n_im: int = Field(11, ge=2)
    center: Tuple[float, float] = (1.0, 0.0)
    radius: PositiveFloat = 0.5
    n_contour: int = Field(64, ge=8)
    chunks: PositiveInt = 64

    @field_validator("re_range", "im_range")
    @classmethod
    def _bracket(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        return _ordered(v, "range")


class SimulateConfig(Section):
    base: Literal["equilibrium", "wavetrain"] = "equilibrium"
    profile_file: Optional[str] = None
    mode_file: Optional[str] = None
    A: Optional[float] = None
    L: Optional[PositiveFloat] = None
    gamma: Optional[float] = None
    periods: PositiveInt = 1
    n_nodes: Optional[int] = Field(None, ge=8)
    epsilon: PositiveFloat = 1e-4
    T: PositiveFloat = 200.0
    scheme: Literal["euler", "trbdf2"] = "trbdf2"
    dt0: PositiveFloat = 1e-3
    dt_max: PositiveFloat = 0.5
    rtol: PositiveFloat = 1e-6
    atol: PositiveFloat = 1e-10
    snapshot_every: Optional[PositiveFloat] = None


class OutputConfig(Section):
    directory: str = "out"
    cache_dir: Optional[str] = None


class RunConfig(Section):
    task: Task = "equilibria"
    threads: PositiveInt = 1
    model: ModelConfig = Field(default_factory=ModelConfig)
    dispersion: DispersionConfig = Field(default_factory=DispersionConfig)
    wavetrain: WavetrainConfig = Field(default_factory=WavetrainConfig)
    bloch: BlochConfig = Field(default_factory=BlochConfig)
    sideband: SidebandConfig = Field(default_factory=SidebandConfig)
    evans: EvansConfig = Field(default_factory=EvansConfig)
    simulate: SimulateConfig = Field(default_factory=SimulateConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> "RunConfig":
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_mapping(data)

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()[:16]
