"""
Experiment configuration and run manifest
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from config import get_defaults

from . import __version__
from .decay_iteration import RadialMetricState
from .ma_solver import NewtonConfig
from .model_space import ModelParams
from .radial import RadialGrid
from .special_functions import QuadratureConfig

logger = logging.getLogger(__name__)

Window = Tuple[float, float]


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ModelSection(_Section):
    n: int = Field(ge=2)
    base_volume: float = Field(1.0, gt=0)
    fiber_normalization: float = Field(1.0, gt=0)
    c: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_ratios(self) -> "ModelSection":
        if len(self.c) > self.n - 1:
            raise ValueError(f"at most n-1 = {self.n - 1} wedge ratios, got {len(self.c)}")
        return self

    def params(self) -> ModelParams:
        return ModelParams(n=self.n, base_volume=self.base_volume, fiber_normalization=self.fiber_normalization)


class GridSection(_Section):
    z_min: float = Field(gt=0)
    z_max: float = Field(gt=0)
    num: int = Field(ge=40)
    fit_window: Window
    gradient_window: Window

    @model_validator(mode="after")
    def _check_windows(self) -> "GridSection":
        if self.z_max <= self.z_min:
            raise ValueError(f"z_max={self.z_max} must exceed z_min={self.z_min}")
        for name in ("fit_window", "gradient_window"):
            lo, hi = getattr(self, name)
            if not self.z_min <= lo < hi <= self.z_max:
                raise ValueError(f"{name} [{lo}, {hi}] not inside the grid [{self.z_min}, {self.z_max}]")
        return self


class IterationSection(_Section):
    steps: int = Field(ge=0)
    order_slack: float = Field(0.2, gt=0)


class SpectralSection(_Section):
    z0: float = Field(1.0, gt=0)
    resolution: int = Field(6, ge=3)
    truncation: int = Field(64, ge=0)
    z_min: float = Field(1.0, ge=1.0)
    z_max: float = Field(20.0, gt=1.0)
    num: int = Field(400, ge=40)
    weyl_window: Window = (50.0, 500.0)


class OutputSection(_Section):
    output_dir: str = "results"
    threads: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    plots: bool = True


class ExperimentConfig(BaseModel):
    """Every knob of a run; JSON round-trippable."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: ModelSection
    grid: GridSection
    quadrature: QuadratureConfig = QuadratureConfig()
    iteration: IterationSection
    newton: NewtonConfig = NewtonConfig()
    spectral: SpectralSection = SpectralSection()
    output: OutputSection = OutputSection()

    @field_validator("iteration")
    @classmethod
    def _check_steps(cls, value: IterationSection, info) -> IterationSection:
        model = info.data.get("model")
        if model is not None and value.steps > model.n + 2:
            raise ValueError(f"at most n+2 = {model.n + 2} iteration steps, got {value.steps}")
        return value

    @model_validator(mode="after")
    def _check_newton_window(self) -> "ExperimentConfig":
        if self.newton.z_min < self.grid.z_min or self.newton.z_max > self.grid.z_max:
            raise ValueError(f"Newton window [{self.newton.z_min}, {self.newton.z_max}] not inside the grid "
                             f"[{self.grid.z_min}, {self.grid.z_max}]")
        return self

    @classmethod
    def defaults(cls, overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> "ExperimentConfig":
        """Defaults from config.py, section-wise updated by overrides."""
        data = get_defaults()
        for section, values in (overrides or {}).items():
            data.setdefault(section, {}).update(values)
        return cls.model_validate(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Parse a JSON document; missing sections fall back to the defaults."""
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.defaults(overrides)

    def dump(self, path) -> Path:
        path = Path(path)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    def canonical_json(self) -> str:
        """Sorted JSON of everything that influences results (output location and threads excluded)."""
        data = self.model_dump(mode="json", exclude={"output": {"output_dir", "threads"}})
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def params(self) -> ModelParams:
        return self.model.params()

    def radial_grid(self) -> RadialGrid:
        return RadialGrid.log_uniform(self.grid.z_min, self.grid.z_max, self.grid.num, self.model.n)

    def initial_state(self) -> RadialMetricState:
        return RadialMetricState.model(self.radial_grid(), self.model.c)


StageStatus = Literal["passed", "failed", "skipped"]


class StageRecord(BaseModel):
    status: StageStatus
    diagnostic: str = ""
    checks: Dict[str, bool] = Field(default_factory=dict)
    values: Dict[str, Optional[float]] = Field(default_factory=dict)   # None for non-finite


class RunManifest(BaseModel):
    """Config hash, tool version, per-stage outcome and emitted files."""

    config_hash: str = ""
    version: str = __version__
    stages: Dict[str, StageRecord] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    decay_columns: List[str] = Field(default_factory=lambda: ["z", "F_0"])

    _tables: Dict[str, Any] = PrivateAttr(default_factory=dict)

    @property
    def tables(self) -> Dict[str, Any]:
        """pandas DataFrames produced by the stages, keyed by table name."""
        return self._tables

    @property
    def passed(self) -> bool:
        return all(record.status == "passed" for record in self.stages.values())

    def record(self, stage: str, status: StageStatus, diagnostic: str = "",
               checks: Optional[Dict[str, bool]] = None,
               values: Optional[Dict[str, Optional[float]]] = None) -> StageRecord:
        entry = StageRecord(status=status, diagnostic=diagnostic, checks=checks or {}, values=values or {})
        self.stages[stage] = entry
        return entry

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path
