"""Pydantic models for structured data validation across the bounds toolkit."""

import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Enums for type safety
class QuadratureKind(str, Enum):
    """Families of quadrature rules."""
    GAUSS_HERMITE = "gauss_hermite"
    GAUSS_LEGENDRE = "gauss_legendre"
    ADAPTIVE_SIMPSON = "adaptive_simpson"


class EstimatorKind(str, Enum):
    """First-stage estimators with a scalar-channel characterization."""
    MF = "MF"
    LASSO = "LASSO"
    MMSE = "MMSE"


class AbscissaKind(str, Enum):
    """Horizontal axis of a bound curve."""
    SNR_DB = "snr_db"
    RHO = "rho"
    ALPHA = "alpha"


class OrdinateKind(str, Enum):
    """Vertical axis of a bound curve."""
    RHO = "rho"
    ALPHA = "alpha"


class BoundSource(str, Enum):
    """Bound or estimator that produced a curve."""
    THM1 = "thm1"
    THM2 = "thm2"
    THM3_MF = "thm3_mf"
    THM3_LASSO = "thm3_lasso"
    THM3_MMSE = "thm3_mmse"
    THM4_ENVELOPE = "thm4_envelope"
    SIMULATION = "simulation"


class Pipeline(str, Enum):
    """Monte Carlo estimation pipelines."""
    NS = "ns"
    MF = "mf"
    LASSO = "lasso"
    AMP = "amp"
    AMP_SHRUNK = "amp_shrunk"
    MMSE_SHRUNK = "mmse_shrunk"
    SCALAR = "scalar"


class Command(str, Enum):
    """CLI commands."""
    BOUNDS = "bounds"
    SIMULATE = "simulate"
    FIGURES = "figures"
    SELFCHECK = "selfcheck"


class SweepScale(str, Enum):
    """Spacing of sweep points."""
    LOG = "log"
    LIN = "lin"


# Numerical kernels
class QuadratureRule(BaseModel):
    """Nodes and positive weights of a quadrature rule on its reference domain."""
    nodes: List[float] = Field(..., min_length=2, description="Abscissae")
    weights: List[float] = Field(..., min_length=2, description="Strictly positive weights")
    kind: QuadratureKind = Field(..., description="Rule family")

    @model_validator(mode="after")
    def check_rule(self) -> "QuadratureRule":
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights must have equal length")
        if any(w <= 0.0 for w in self.weights):
            raise ValueError("quadrature weights must be strictly positive")
        total = math.fsum(self.weights)
        expected = {
            QuadratureKind.GAUSS_HERMITE: math.sqrt(math.pi),
            QuadratureKind.GAUSS_LEGENDRE: 2.0,
            QuadratureKind.ADAPTIVE_SIMPSON: 1.0,
        }[self.kind]
        if abs(total - expected) > 1e-9 * expected:
            raise ValueError(f"{self.kind.value} weights sum to {total}, expected {expected}")
        return self


# Problem parameters
class ProblemConfig(BaseModel):
    """The tuple (kappa, SNR, J, rho, alpha) parameterizing bounds and experiments."""
    model_config = ConfigDict(frozen=True)

    kappa: float = Field(..., gt=0.0, lt=0.5, description="Sparsity rate")
    snr: float = Field(..., gt=0.0, description="Linear signal-to-noise ratio")
    J: int = Field(1, ge=1, description="Diversity")
    alpha: float = Field(0.1, ge=0.0, le=1.0, description="Target distortion")
    rho: Optional[float] = Field(None, gt=0.0, description="Total sampling rate J*r")

    @classmethod
    def from_db(cls, snr_db: float, **kwargs) -> "ProblemConfig":
        """Build a config from an SNR given in decibels."""
        return cls(snr=db_to_linear(snr_db), **kwargs)

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.snr)

    @property
    def r(self) -> Optional[float]:
        """Per-vector sampling rate."""
        return None if self.rho is None else self.rho / self.J


class ScalarChannel(BaseModel):
    """Equivalent scalar observation X + sigma*W of a first-stage estimator."""
    kappa: float = Field(..., gt=0.0, le=1.0, description="Prior sparsity")
    sigma2: float = Field(..., gt=0.0, description="Effective noise power")
    threshold_t: Optional[float] = Field(None, ge=0.0, description="Soft threshold (LASSO only)")
    estimator_kind: EstimatorKind = Field(..., description="Estimator the channel describes")

    @model_validator(mode="after")
    def check_threshold(self) -> "ScalarChannel":
        if (self.threshold_t is not None) != (self.estimator_kind == EstimatorKind.LASSO):
            raise ValueError("threshold_t must be present exactly for the LASSO channel")
        return self


class StateEvolutionResult(BaseModel):
    """Fixed point (sigma^2, t) of the LASSO state evolution."""
    sigma2: float = Field(..., gt=0.0, description="Effective noise power")
    threshold_t: float = Field(..., ge=0.0, description="Effective soft threshold")
    iterations: int = Field(..., ge=0, description="Damped iterations of the accepted run")
    multiple_fixed_points: bool = Field(False, description="Initializations disagreed")
    residual_sigma2: float = Field(..., description="Re-substituted sigma^2 equation residual")
    residual_t: float = Field(..., description="Re-substituted threshold equation residual")

    def channel(self, kappa: float) -> ScalarChannel:
        return ScalarChannel(
            kappa=kappa, sigma2=self.sigma2, threshold_t=self.threshold_t,
            estimator_kind=EstimatorKind.LASSO,
        )


class MmseResult(BaseModel):
    """Minimizer of the replica objective."""
    sigma2: float = Field(..., gt=0.0, description="Effective noise power")
    objective: float = Field(..., description="Objective value at the minimizer")
    multiple_minima: bool = Field(False, description="More than one local minimum on the grid")

    def channel(self, kappa: float) -> ScalarChannel:
        return ScalarChannel(kappa=kappa, sigma2=self.sigma2, estimator_kind=EstimatorKind.MMSE)


class LassoTuning(BaseModel):
    """Regularization giving the smallest state-evolution noise power."""
    lam: float = Field(..., ge=0.0, description="Regularization parameter lambda")
    sigma2: float = Field(..., gt=0.0, description="Noise power at lam")
    threshold_t: float = Field(..., ge=0.0, description="Threshold at lam")


class DiversityChoice(BaseModel):
    """Per-diversity distortions at a fixed sampling rate."""
    rho: float = Field(..., gt=0.0, description="Total sampling rate")
    distortions: Dict[int, float] = Field(..., description="Achievable distortion for each J")
    best_J: int = Field(..., ge=1, description="Diversity with the smallest distortion")

    @property
    def best_distortion(self) -> float:
        return self.distortions[self.best_J]


# Curves
class CurvePoint(BaseModel):
    """One (abscissa, ordinate) pair; a missing ordinate marks a failed point."""
    abscissa: float
    ordinate: Optional[float] = None


class PointFailure(BaseModel):
    """Structured record of a curve point that could not be computed."""
    abscissa: float = Field(..., description="Abscissa of the failed point")
    error_type: str = Field(..., description="Exception class name")
    message: str = Field(..., description="Human-readable error message")


class BoundCurve(BaseModel):
    """Ordered points with the metadata identifying their provenance."""
    points: List[CurvePoint] = Field(default_factory=list)
    abscissa_kind: AbscissaKind
    ordinate_kind: OrdinateKind
    source: BoundSource
    config: ProblemConfig
    label: str = Field("", description="File stem distinguishing variants of one source")
    failures: List[PointFailure] = Field(default_factory=list)

    @field_validator("points")
    @classmethod
    def validate_points(cls, v: List[CurvePoint]) -> List[CurvePoint]:
        """Abscissae strictly increasing, ordinates finite and nonnegative."""
        for previous, current in zip(v, v[1:]):
            if not current.abscissa > previous.abscissa:
                raise ValueError("curve abscissae must be strictly increasing")
        for point in v:
            if point.ordinate is not None and (not math.isfinite(point.ordinate) or point.ordinate < 0):
                raise ValueError(f"invalid ordinate {point.ordinate} at {point.abscissa}")
        return v

    @property
    def abscissae(self) -> List[float]:
        return [p.abscissa for p in self.points]

    @property
    def ordinates(self) -> List[Optional[float]]:
        return [p.ordinate for p in self.points]


# Estimation
class EstimationDiagnostics(BaseModel):
    """Solver diagnostics attached to a support estimate."""
    iterations: int = Field(0, ge=0)
    residual_norm: Optional[float] = Field(None, ge=0.0)
    threshold: Optional[float] = Field(None, ge=0.0)
    sigma2_estimate: Optional[float] = Field(None, ge=0.0)


class EstimationResult(BaseModel):
    """Estimated support together with its distortion against the truth."""
    estimated_support: List[int] = Field(..., description="Sorted estimated indices")
    distortion: float = Field(..., ge=0.0, description="(1/k) max(missed, false alarms)")
    missed: int = Field(..., ge=0)
    false_alarms: int = Field(..., ge=0)
    estimator: Pipeline
    diagnostics: EstimationDiagnostics = Field(default_factory=EstimationDiagnostics)


class TrialRecord(BaseModel):
    """Outcome of one Monte Carlo trial."""
    trial: int = Field(..., ge=0)
    seed: int = Field(..., ge=0)
    distortion: Optional[float] = Field(None, ge=0.0)
    missed: Optional[int] = Field(None, ge=0)
    false_alarms: Optional[int] = Field(None, ge=0)
    threshold: Optional[float] = None
    error: Optional[str] = None


class MonteCarloSummary(BaseModel):
    """Aggregate distortion statistics, schema of the simulate JSON output."""
    mean_distortion: float
    q05: float
    q50: float
    q95: float
    achieved_fraction: float = Field(..., ge=0.0, le=1.0)
    trials: int = Field(..., ge=1)
    seed: int = Field(..., ge=0)
    pipeline: Pipeline
    theory_sigma2: Optional[float] = None
    theory_threshold: Optional[float] = None
    failed_trials: List[int] = Field(default_factory=list)


class MonteCarloRun(BaseModel):
    """Summary plus the index-ordered per-trial records it was computed from."""
    summary: MonteCarloSummary
    records: List[TrialRecord]


# CLI
class SweepSpec(BaseModel):
    """Sweep axis with its range and spacing."""
    axis: AbscissaKind
    min: float
    max: float
    points: int = Field(..., ge=2)
    scale: SweepScale = SweepScale.LIN

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """Parse ``axis:min:max:points:log|lin``."""
        parts = text.split(":")
        if len(parts) != 5:
            raise ValueError(f"sweep must look like axis:min:max:points:log|lin, got {text!r}")
        axis, lo, hi, points, scale = parts
        return cls(axis=axis, min=float(lo), max=float(hi), points=int(points), scale=scale)

    @model_validator(mode="after")
    def check_range(self) -> "SweepSpec":
        if not self.max > self.min:
            raise ValueError("sweep max must exceed min")
        if self.scale == SweepScale.LOG and self.min <= 0:
            raise ValueError("log sweeps need a positive minimum")
        return self

    def values(self) -> List[float]:
        if self.scale == SweepScale.LOG:
            lo, hi = math.log10(self.min), math.log10(self.max)
            return [10.0 ** (lo + (hi - lo) * i / (self.points - 1)) for i in range(self.points)]
        return [self.min + (self.max - self.min) * i / (self.points - 1) for i in range(self.points)]


class RunSpec(BaseModel):
    """Everything one CLI invocation needs; mirrors the --config JSON file."""
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    command: Command
    kappa: float = Field(1e-4, gt=0.0, lt=0.5, description="Sparsity rate")
    snr_db: float = Field(40.0, description="SNR in dB")
    J: int = Field(1, ge=1, description="Diversity")
    alpha: float = Field(0.1, ge=0.0, le=1.0, description="Target distortion")
    rho: Optional[float] = Field(None, gt=0.0, description="Total sampling rate")
    sweep: Optional[SweepSpec] = None
    estimators: List[str] = Field(default_factory=list, description="Sources to evaluate")
    trials: int = Field(10, ge=1)
    n: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)
    lam: Optional[float] = Field(None, ge=0.0, alias="lambda", description="LASSO regularization")
    sigma2: Optional[float] = Field(None, gt=0.0, description="Noise power of the scalar pipeline")
    pipeline: Pipeline = Pipeline.MF
    workers: Optional[int] = Field(None, ge=1)
    output_path: str = Field("results", description="Output directory")

    @field_validator("sweep", mode="before")
    @classmethod
    def parse_sweep(cls, v):
        if isinstance(v, str):
            return SweepSpec.parse(v)
        return v

    @property
    def snr(self) -> float:
        return db_to_linear(self.snr_db)

    def problem_config(self, **overrides) -> ProblemConfig:
        values = dict(kappa=self.kappa, snr=self.snr, J=self.J, alpha=self.alpha, rho=self.rho)
        values.update(overrides)
        return ProblemConfig(**values)


class SelfCheckResult(BaseModel):
    """Outcome of one named invariant of the self-check suite."""
    name: str
    module: str
    passed: bool
    detail: str = ""


class RunOutcome(BaseModel):
    """Files written by one command and the failures met along the way."""
    command: Command
    run_id: str
    files: List[str] = Field(default_factory=list, description="Written paths, in write order")
    point_failures: int = Field(0, ge=0, description="Curve points left empty")
    failed_trials: List[int] = Field(default_factory=list, description="Monte Carlo trials that raised")
    checks: List[SelfCheckResult] = Field(default_factory=list, description="Self-check results")

    @property
    def partial(self) -> bool:
        return self.point_failures > 0 or bool(self.failed_trials)

    @property
    def checks_passed(self) -> bool:
        return all(check.passed for check in self.checks)


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def linear_to_db(snr: float) -> float:
    return 10.0 * math.log10(snr)
