"""Pydantic models for contour stochastic integrals and Ito checks."""

from enum import Enum

from pydantic import BaseModel, Field

from app.schemas.common import ComplexValue


class RefinementScheme(str, Enum):
    DYADIC = "dyadic"
    TRIADIC = "triadic"

    @property
    def factor(self) -> int:
        return 2 if self is RefinementScheme.DYADIC else 3


class LevelRecord(BaseModel):
    """One refinement level of the Riemann sums."""

    level: int
    panels: int = Field(..., description="Panels per contour piece")
    cauchy_residual: float | None = Field(None, description="||S_M - S_prev||_{-p}")
    norm: float | None = None
    stability_bound: float | None = Field(None, description="Sum over pieces of max ||f * N gamma'||_{-p}")


class IntegralReport(BaseModel):
    contour_id: str
    integrand: str
    scheme: RefinementScheme
    p: int
    N: int
    tol: float
    panels: int
    levels: list[LevelRecord]
    stable: bool | None = None
    terms: int = Field(..., description="Stored coefficients of the result")
    result: list[dict] = Field(..., description="ChaosVector document of the integral")


class ItoCorrection(BaseModel):
    """The regularized Ito correction computed three ways."""

    z: ComplexValue
    eps: float
    series: ComplexValue = Field(..., description="sum over n <= N of eps^n (integral of zeta_n over [0,z])^2")
    closed_form: ComplexValue = Field(..., description="z^2 times the Mehler double integral, 1/sqrt(pi) prefactor")
    literal_variant: ComplexValue = Field(..., description="closed form with the 1/sqrt(2 pi) prefactor")
    gap: float = Field(..., description="|series - closed_form|")


class ItoRealReport(BaseModel):
    t: float
    p: int
    N: int
    residual_norm: float
    antisymmetry_max: float
    parseval_gap: float = Field(..., description="|sum over n <= N of (integral of zeta_n over [0,t])^2 - t|")
    tol: float
    ok: bool
    levels: int


class ItoRegularizedReport(BaseModel):
    z: ComplexValue
    eps: float
    p: int
    N: int
    residual_norm: float
    correction: ItoCorrection
    tol: float
    ok: bool
    levels: int
