"""Pydantic models for complex Hermite function evaluation and bounds."""

from enum import Enum
from typing import Annotated

from pydantic import BaseModel, BeforeValidator, Field

from app.core.config import MAGNITUDE_CAP
from app.schemas.common import ComplexValue


class Convention(str, Enum):
    """Sign convention for the normalized Hermite functions."""

    STANDARD = "standard"
    ALTERNATING = "alternating"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str) and value.lower() == "paper_signed":
            return cls.ALTERNATING
        return None


# Accepts the "paper_signed" spelling of the alternating convention
ConventionName = Annotated[Convention, BeforeValidator(lambda value: Convention(value) if isinstance(value, str) else value)]


class HermiteConfig(BaseModel):
    """Evaluation limits for the Hermite service."""

    n_max: int = Field(128, ge=1, description="Degree cap")
    radius_cap: float = Field(3.0, gt=0, le=8, description="Evaluation disk radius R")
    quad_tol: float = Field(1e-10, gt=0, le=1e-3, description="Antiderivative tolerance")
    convention: ConventionName = Convention.STANDARD
    magnitude_cap: float = Field(MAGNITUDE_CAP, gt=0, description="Overflow guard")


class BoundEnvelope(BaseModel):
    """Constants c_z, C_R and K_n, with their logarithms."""

    c_z: float
    C_R: float
    K_n: float
    log_c_z: float
    log_C_R: float
    log_K_n: float
    C_R_closed_form: float = Field(..., description="Boundary maximum from the closed form")


class BoundReport(BaseModel):
    """Which Hermite inequalities hold at one (n, z)."""

    n: int
    z: ComplexValue
    zeta_ok: bool
    zeta_prime_ok: bool
    zeta_prime_sharp_ok: bool
    em_ok: bool
    hille_ok: bool
    zeta_margin: float = Field(..., description="log(envelope) - log|zeta_n(z)|")
    zeta_prime_margin: float


class GridCertificate(BaseModel):
    """Outcome of certifying the envelopes on a polar grid."""

    n_max: int
    radius: float
    points: int
    zeta_ok: bool
    zeta_prime_ok: bool
    em_ok: bool
    hille_ok: bool
    worst_zeta_margin: float
    worst_zeta_prime_margin: float


class EnvelopeComparison(BaseModel):
    """Log envelopes c_z e^{2n|Im z|} and the one from the Hille-type polynomial bound."""

    n: int
    z: ComplexValue
    radius: float
    log_strip_envelope: float
    log_hille_envelope: float
    strip_smaller: bool


class StirlingReport(BaseModel):
    """Stirling sandwich checked in log domain for 1 <= n <= n_max."""

    n_max: int
    sharp_ok: bool = Field(..., description="exp(1/(12n+1)) lower and exp(1/(12n)) upper factors")
    relaxed_ok: bool = Field(..., description="factor 1 lower and e upper")
    worst_lower_margin: float
    worst_upper_margin: float


class RecurrenceResiduals(BaseModel):
    """Maximum relative residuals of the three recurrences."""

    derivative_down: float = Field(..., description="zeta' = -z zeta_n + sqrt(2n) zeta_{n-1}")
    derivative_up: float = Field(..., description="zeta' = z zeta_n - sqrt(2(n+1)) zeta_{n+1}")
    three_term: float = Field(..., description="z zeta_n = sqrt(n/2) zeta_{n-1} + sqrt((n+1)/2) zeta_{n+1}")


class ZetaRequest(BaseModel):
    """Request body for Hermite function evaluation."""

    n: int = Field(..., ge=0, le=5000, description="Degree")
    z: ComplexValue
    derivative: bool = False
    convention: ConventionName = Convention.STANDARD


class ZetaResponse(BaseModel):
    n: int
    z: ComplexValue
    value: ComplexValue
    envelope: BoundEnvelope


class BoundsRequest(BaseModel):
    n: int = Field(..., ge=1, le=5000)
    z: ComplexValue
    radius: float | None = Field(None, gt=0, le=8)


class MehlerRequest(BaseModel):
    eps: float = Field(..., gt=-1, lt=1)
    u: ComplexValue
    v: ComplexValue
    n_terms: int = Field(200, ge=0, le=5000)


class MehlerResponse(BaseModel):
    kernel: ComplexValue
    series: ComplexValue
    deviation: float
