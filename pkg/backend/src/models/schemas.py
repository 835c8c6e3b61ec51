"""Schemas for run configuration, reports and snapshots."""
import math
from datetime import datetime, timezone
from enum import Enum as PyEnum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.constant import BURN_IN_FACTOR, SNAPSHOT_FORMAT_VERSION, VERDICT_ROUNDING, VERDICT_SIGMAS
from src.config.settings import settings
from src.models.configuration import StateClass


class Command(str, PyEnum):
    BOUNDS = "bounds"
    SAMPLE = "sample"
    CHAIN = "chain"
    CONTRACTION = "contraction"
    DISAGREEMENT = "disagreement"
    DENSITY = "density"
    STATIONARITY = "stationarity"
    SSM_SCAN = "ssm-scan"
    FREE_VOLUME = "free-volume"
    MIXING = "mixing"
    PARALLEL_SET = "parallel-set"
    PREMETRIC = "premetric"
    HEAT_BATH_COUPLING = "heat-bath-coupling"
    PROJECTED_MIXING = "projected-mixing"


class Comparison(str, PyEnum):
    LE = "<="
    GE = ">="


class Verdict(str, PyEnum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


class Kernel(str, PyEnum):
    SINGLE_CENTER = "single-center"
    HEAT_BATH = "heat-bath"


def decide_verdict(estimate: float, standard_error: float, bound: float, comparison: Comparison) -> Verdict:
    """
    Three-band verdict of ``estimate (comparison) bound``.

    Args:
        estimate: Measured value
        standard_error: Its standard error
        bound: Theoretical bound
        comparison: Direction of the inequality

    Returns:
        PASS when the inequality holds (up to relative rounding), INCONCLUSIVE
        when it fails by at most three standard errors, FAIL otherwise
    """
    excess = estimate - bound if comparison is Comparison.LE else bound - estimate
    if excess <= VERDICT_ROUNDING * max(abs(estimate), abs(bound)):
        return Verdict.PASS
    if excess <= VERDICT_SIGMAS * standard_error:
        return Verdict.INCONCLUSIVE
    return Verdict.FAIL


class BoundResult(BaseModel):
    value: float
    formula_id: str
    inputs: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("value")
    @classmethod
    def value_must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("bound value must be finite")
        return v


class ExperimentReport(BaseModel):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    estimate: float
    stderr: float = Field(0.0, ge=0.0)
    bound: float
    comparison: Comparison
    verdict: Verdict
    replicas: int = Field(1, ge=0)
    seed: int
    code_version: str = Field(default_factory=lambda: settings.CODE_VERSION)
    note: Optional[str] = None
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @classmethod
    def judged(cls, name: str, estimate: float, stderr: float, bound: float, comparison: Comparison, **kwargs) -> "ExperimentReport":
        """Build a report whose verdict follows from the three-band rule."""
        verdict = decide_verdict(estimate, stderr, bound, comparison)
        return cls(name=name, estimate=estimate, stderr=stderr, bound=bound, comparison=comparison, verdict=verdict, **kwargs)

    def body(self) -> Dict[str, Any]:
        """Report fields without the timestamp; identical for identical runs."""
        return self.model_dump(mode="json", exclude={"timestamp"})


class ContractionCaseBreakdown(BaseModel):
    a1: float = Field(..., description="Deletion of v")
    a2: float = Field(..., description="Addition to X only")
    a3: float = Field(..., description="Blocking inside U_X(v)")
    a4: float = Field(..., description="Unblocking inside O_X(v)")
    total: float

    @model_validator(mode="after")
    def total_is_sum(self) -> "ContractionCaseBreakdown":
        if not math.isclose(self.total, self.a1 + self.a2 + self.a3 + self.a4, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError("total must equal a1 + a2 + a3 + a4")
        return self

    @classmethod
    def from_cases(cls, a1: float, a2: float, a3: float, a4: float) -> "ContractionCaseBreakdown":
        return cls(a1=a1, a2=a2, a3=a3, a4=a4, total=a1 + a2 + a3 + a4)


class BallSpec(BaseModel):
    center: List[float]
    radius: float = Field(..., gt=0.0)


class TauSpec(BaseModel):
    balls: List[BallSpec] = Field(default_factory=list)
    shell: Optional[float] = Field(None, ge=0.0)
    allowed_box: Optional[Dict[str, Any]] = None


class BoxSpec(BaseModel):
    low: List[float]
    high: List[float]


class SnapshotRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = SNAPSHOT_FORMAT_VERSION
    d: int = Field(..., ge=1)
    box: BoxSpec
    # "lambda" is a keyword
    lam: float = Field(..., ge=0.0, alias="lambda")
    tau: TauSpec = Field(default_factory=TauSpec)
    centers: List[List[float]] = Field(default_factory=list)
    step: int = Field(0, ge=0)
    seed: int
    stream_id: int = 0
    state_class: StateClass = StateClass.OMEGA

    @field_validator("format_version")
    @classmethod
    def version_must_match(cls, v: int) -> int:
        if v != SNAPSHOT_FORMAT_VERSION:
            raise ValueError(f"snapshot format_version {v} is not supported (expected {SNAPSHOT_FORMAT_VERSION})")
        return v


class RunConfig(BaseModel):
    """Validated configuration of one CLI invocation."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    command: Command
    d: int = Field(2, ge=1, le=20)
    lam: Optional[float] = Field(None, ge=0.0, alias="lambda")
    box_side: float = Field(10.0, gt=0.0)
    lam_list: List[float] = Field(default_factory=lambda: [0.1, 0.25, 0.5])
    box_sides: List[float] = Field(default_factory=lambda: [10.0])
    tau_shell: Optional[float] = Field(None, ge=0.0)
    tau_balls: List[BallSpec] = Field(default_factory=list)
    kernel: Kernel = Kernel.SINGLE_CENTER
    l_over_r: float = Field(2.0, ge=1.0)
    steps: int = Field(10_000, ge=0)
    burn_in: Optional[int] = Field(None, ge=0)
    trials: int = Field(1_000, ge=1)
    replicas: int = Field(4, ge=1)
    gamma: float = 0.5
    epsilon: float = Field(0.05, gt=0.0, lt=1.0)
    eta: Optional[float] = Field(None, gt=0.0)
    samples: int = Field(default_factory=lambda: settings.VOLUME_SAMPLES, ge=1)
    seed: Optional[int] = None
    output: Optional[str] = None
    csv: Optional[str] = None
    snapshot_in: Optional[str] = None
    snapshot_out: Optional[str] = None
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    log_level: str = Field(default_factory=lambda: settings.LOG_LEVEL)

    @field_validator("gamma")
    @classmethod
    def gamma_in_open_unit_interval(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("gamma must lie in (0,1)")
        return v

    @field_validator("lam_list")
    @classmethod
    def fugacities_non_negative(cls, v: List[float]) -> List[float]:
        if any(x < 0 or not math.isfinite(x) for x in v):
            raise ValueError("every fugacity must be finite and non-negative")
        return v

    @model_validator(mode="after")
    def check_combinations(self) -> "RunConfig":
        needs_lambda = {Command.SAMPLE, Command.CHAIN, Command.FREE_VOLUME, Command.SSM_SCAN, Command.HEAT_BATH_COUPLING}
        if self.command in needs_lambda and self.lam is None:
            raise ValueError(f"{self.command.value} requires --lambda")
        if self.command is Command.FREE_VOLUME and self.lam == 0.0:
            raise ValueError("free-volume requires lambda > 0")
        if self.csv is not None and self.output is None:
            raise ValueError("--csv converts the --output report file; give --output too")
        if self.command is Command.STATIONARITY and self.kernel is Kernel.HEAT_BATH and self.l_over_r <= 1.0:
            raise ValueError("the heat-bath kernel needs l_over_r > 1")
        return self

    def effective_burn_in(self, n: float, lam: float) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return int(math.ceil(BURN_IN_FACTOR * n * (1.0 + lam)))
