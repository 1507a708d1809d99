"""Pydantic models for truncation plans, process specifications and process diagnostics."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.common import ComplexValue


class TruncationPlan(BaseModel):
    """
    Graded-norm order p and series truncation N for a disk of radius R.

    q = e^{4R}/2^p must be below 1; tail_bound = C_R^2 2^{-p} q^{N+1}/(1-q).
    """

    model_config = ConfigDict(frozen=True)

    R: float = Field(..., gt=0, le=8, description="Disk radius")
    p: int = Field(..., ge=1, description="Graded norm order")
    N: int = Field(..., ge=0, description="Highest retained degree")
    tol: float = Field(..., gt=0)
    q: float = Field(..., gt=0, lt=1, description="Geometric ratio e^{4R}/2^p")
    log_C_R: float
    tail_bound: float = Field(..., ge=0)
    tail_ok: bool = Field(..., description="tail_bound <= tol^2")


class ProcessKind(str, Enum):
    BROWNIAN = "brownian"
    WHITE_NOISE = "white_noise"
    WEIGHTED = "weighted"
    REGULARIZED = "regularized"


class WeightFamily(str, Enum):
    """Closed catalog of weights m with an analytic square root."""

    UNIT = "unit"  # m = 1
    POLYNOMIAL = "polynomial"  # m = (1+u^2)^{2k}
    EXP_PLUS = "exp_plus"  # m = e^{u^{2k}}
    EXP_MINUS = "exp_minus"  # m = e^{-u^{2k}}


class ProcessSpec(BaseModel):
    """Which order-1 process to build."""

    model_config = ConfigDict(frozen=True)

    kind: ProcessKind = ProcessKind.BROWNIAN
    family: WeightFamily = WeightFamily.UNIT
    k: int = Field(1, ge=1, le=8, description="Exponent parameter of the weight family")
    eps: float = Field(0.0, ge=0, lt=1, description="Regularization parameter")

    @model_validator(mode="after")
    def check_kind(self) -> "ProcessSpec":
        if self.family != WeightFamily.UNIT and self.kind != ProcessKind.WEIGHTED:
            raise ValueError("A weight family requires kind='weighted'")
        return self


class AnalyticityReport(BaseModel):
    """Difference-quotient residuals ||(B_{z0+h}-B_{z0})/h - N_{z0}||_{-p}."""

    z0: ComplexValue
    h_values: list[float]
    residuals: dict[str, list[float]] = Field(..., description="Direction label -> residual per h")
    orders: dict[str, float | None] = Field(..., description="Least-squares slope of log residual vs log h")
    observed_order: float | None = Field(None, description="Smallest slope over directions")
    bound_constant: float | None = Field(None, description="C with residual(h) <= C h; unweighted processes only")
    bound_ok: bool | None = None
    direction_spread: float = Field(..., description="Largest quotient disagreement at the smallest h")
    directions_agree: bool


class ContinuityReport(BaseModel):
    z1: ComplexValue
    z2: ComplexValue
    distance: float = Field(..., description="||B_{z1} - B_{z2}||_{-p}")
    bound: float
    ok: bool


class MembershipReport(BaseModel):
    """Uniform bound on ||B_z||_{-p} and the per-coefficient bound over sample points."""

    points: int
    max_norm: float
    norm_bound: float
    norm_ok: bool
    coefficient_ok: bool
    worst_coefficient_ratio: float = Field(..., description="max |c_n| / (R C_R e^{2Rn})")


class CovarianceReport(BaseModel):
    """Truncated sum of coeff_n(t) coeff_n(s) against the integral of m over [0, min(t,s)]."""

    t: float
    s: float
    N: int
    series: float
    exact: float
    gap: float


class PlanRequest(BaseModel):
    radius: float = Field(1.0, gt=0, le=8)
    tol: float = Field(1e-6, gt=0, le=1e-1)
    n_terms: int | None = Field(None, ge=0, le=5000)
    p: int | None = Field(None, ge=1, le=64)


class CoefficientsRequest(PlanRequest):
    z: ComplexValue
    spec: ProcessSpec = ProcessSpec()


class CoefficientsResponse(BaseModel):
    plan: TruncationPlan
    spec: ProcessSpec
    z: ComplexValue
    coefficients: list[ComplexValue]
    norm_minus: float
