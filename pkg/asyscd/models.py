from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from asyscd import __version__


class Regime(str, Enum):
    UNCONSTRAINED = "unconstrained"
    CONSTRAINED = "constrained"


class PlanSource(str, Enum):
    COROLLARY = "corollary"
    GENERAL = "general"
    FORCED = "forced"


class EnvelopeKind(str, Enum):
    LINEAR = "linear"
    SUBLINEAR = "sublinear"


class Measure(str, Enum):
    GAP = "gap"            # E f(x_j) - f*
    COMBINED = "combined"  # E |x_j - x*|^2 + (2 gamma / L_max)(E f(x_j) - f*)


class ScheduleKind(str, Enum):
    ZERO = "zero"
    FIXED_TAU = "fixed"
    RANDOM_UNIFORM = "random"
    ADVERSARIAL = "adversarial"
    REPLAY = "replay"


# Theory records
class StepPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(gt=0.0, le=1.0)
    rho: Optional[float] = None
    psi: Optional[float] = None
    tau: int = Field(ge=0)
    regime: Regime
    n: int = Field(ge=1)
    ratio: float = Field(ge=1.0)
    l_max: float = Field(gt=0.0)
    provenance: PlanSource
    active_bound: Optional[str] = None

    @field_validator("rho")
    @classmethod
    def rho_above_one(cls, v):
        if v is not None and v <= 1.0:
            raise ValueError("rho must exceed 1")
        return v

    @property
    def step(self) -> float:
        """Coordinate steplength gamma / L_max"""
        return self.gamma / self.l_max


class RateEnvelope(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: EnvelopeKind
    regime: Regime
    provenance: PlanSource
    measure: Measure = Measure.GAP
    n: int
    l_max: float
    gamma: float
    initial: float = Field(ge=0.0)
    factor: Optional[float] = None   # linear: value_j = initial * factor**j
    slope: Optional[float] = None    # sublinear unconstrained: 1 / (1/initial + slope*j)
    modulus: Optional[float] = None
    psi: Optional[float] = None
    r0: Optional[float] = None
    radius: Optional[float] = None
    f0_gap: float = Field(ge=0.0)

    @model_validator(mode="after")
    def check_shape(self):
        if self.kind == EnvelopeKind.LINEAR and not (self.factor is not None and 0.0 < self.factor < 1.0):
            raise ValueError(f"linear envelope factor must lie in (0, 1), got {self.factor}")
        return self


class ModulusEstimate(BaseModel):
    value: float = Field(ge=0.0)
    known: bool
    source: str


# Simulator records
class DelaySchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ScheduleKind
    tau: int = Field(0, ge=0)
    seed: Optional[int] = None  # random lags fall back to the run seed
    lags: Optional[Tuple[int, ...]] = None

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == ScheduleKind.ZERO and self.tau != 0:
            raise ValueError("zero schedule has tau = 0")
        if self.kind == ScheduleKind.REPLAY and self.lags is None:
            raise ValueError("replay schedule needs an explicit lag list")
        return self

    @classmethod
    def zero(cls) -> "DelaySchedule":
        return cls(kind=ScheduleKind.ZERO, tau=0)


class TracePoint(BaseModel):
    j: int = Field(ge=0)
    epoch: float
    residual: float
    objective: float
    gap: Optional[float] = None
    dist_sq: Optional[float] = None
    measure: Optional[float] = None
    seconds: Optional[float] = None


class Trace(BaseModel):
    points: List[TracePoint] = Field(default_factory=list)
    stride: int = Field(1, ge=1)

    @field_validator("points")
    @classmethod
    def strictly_increasing(cls, points):
        for before, after in zip(points, points[1:]):
            if after.j <= before.j:
                raise ValueError(f"trace iterations must increase strictly: {before.j} then {after.j}")
        return points

    def to_frame(self) -> pd.DataFrame:
        columns = ["j", "epoch", "residual", "objective", "gap", "dist_sq", "measure", "seconds"]
        frame = pd.DataFrame([p.model_dump() for p in self.points], columns=columns)
        # optional fields come through as None
        frame[columns[1:]] = frame[columns[1:]].astype(float)
        return frame

    @property
    def last(self) -> TracePoint:
        return self.points[-1]


class RatioBand(BaseModel):
    ratios: List[float]
    min_ratio: float
    max_ratio: float
    rho: Optional[float] = None
    regime: Regime
    seeds: int


# Solver records
class SolverConfig(BaseModel):
    threads: int = Field(1, ge=1)
    gamma: float = Field(1.0, gt=0.0)
    shuffle_period: int = Field(1, ge=1)
    tolerance: float = Field(1e-5, gt=0.0)
    max_epochs: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    check_interval: int = Field(1, ge=1)


class SolverStats(BaseModel):
    engine: str
    threads: int
    solve_seconds: float
    check_seconds: float = 0.0
    epochs: float
    updates: int
    final_residual: float
    tolerance: float
    tolerance_reached: bool

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.model_dump()])


class SpeedupRow(BaseModel):
    threads: int
    median_sec: float
    speedup: Optional[float] = None
    epochs: float
    reached: bool


# Generator specs
class SyntheticSpec(BaseModel):
    m: int = Field(ge=1)
    n: int = Field(ge=1)
    alpha: float = Field(0.5, ge=0.0)
    seed: int = Field(0, ge=0)
    constrained: bool = False


class GraphSpec(BaseModel):
    edges: List[Tuple[int, int]]
    beta: float = Field(5.0, gt=0.0)
    rhs: float = 0.0  # b in y_u + y_v - s_uv = b

    @field_validator("edges")
    @classmethod
    def no_self_loops(cls, edges):
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u} is not allowed in a vertex-cover graph")
        return edges


class SvmSample(BaseModel):
    label: int
    indices: List[int] = Field(default_factory=list)
    values: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_sample(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("feature indices must be sorted and unique")
        return self


class SvmSpec(BaseModel):
    samples: List[SvmSample]
    C: float = Field(1.0, gt=0.0)

    @property
    def n_features(self) -> int:
        return max((s.indices[-1] + 1 for s in self.samples if s.indices), default=0)


# Harness records
class RunManifest(BaseModel):
    subcommand: str
    problem_source: Optional[str] = None
    plan: Optional[Dict[str, Any]] = None
    solver_config: Optional[Dict[str, Any]] = None
    outputs: List[str] = Field(default_factory=list)
    arguments: Dict[str, Any] = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=list)
    started_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    finished_at: Optional[datetime] = None
    tool_version: str = __version__


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {self.detail}".rstrip()
