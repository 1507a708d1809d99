"""Pydantic models for the Parseval, divergence and Mehler identity scans."""

from pydantic import BaseModel, Field


class ParsevalRow(BaseModel):
    N: int
    partial_sum: float = Field(..., description="S_N = sum over n <= N of (integral of zeta_n over [0,t])^2")
    gap: float = Field(..., description="t - S_N")


class ParsevalReport(BaseModel):
    t: float
    rows: list[ParsevalRow]
    monotone: bool
    bessel_ok: bool = Field(..., description="S_N <= t for every N")


class DivergenceRow(BaseModel):
    eps: float
    partial_sum: float = Field(..., description="sum over n <= N of eps^n |integral of zeta_n over [0,iT]|^2")
    lower_bound: float
    exact: float = Field(..., description="Full series from the Mehler closed form")
    allowance: float = Field(..., description="max(0, exact - partial_sum)")
    certified: bool = Field(..., description="lower_bound <= partial_sum + allowance")


class DivergenceReport(BaseModel):
    T: float
    N: int
    rows: list[DivergenceRow]
    monotone: bool = Field(..., description="partial sums strictly increasing in eps")
    certified: bool
    growth_ratio: float | None = Field(None, description="S(0.95) / S(0.5) when both are on the grid")


class MehlerReport(BaseModel):
    eps: float
    N: int
    points: int
    max_deviation: float = Field(..., description="max |series - kernel|")
    literal_prefactor_deviation: float = Field(..., description="max |series - kernel/sqrt(2)|")
    max_asymmetry: float = Field(..., description="max |K(u,v) - K(v,u)| over kernel and series")
    identity_gap: float = Field(..., description="max over z of |double integral of the series - sum eps^n c_n(z)^2|")


class ParsevalRequest(BaseModel):
    t: float = Field(1.0, gt=0, le=8)
    n_list: list[int] = Field(default_factory=lambda: [16, 64, 256], max_length=32)


class DivergenceRequest(BaseModel):
    T: float = Field(1.0, gt=0, le=4)
    eps_grid: list[float] = Field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9, 0.95])
    N: int = Field(400, ge=0, le=2000)
