"""Complex Hermite function endpoints."""

import logging

from fastapi import APIRouter

from app.api.errors import service_errors
from app.schemas.common import ComplexValue
from app.schemas.hermite import (
    BoundReport,
    BoundsRequest,
    Convention,
    HermiteConfig,
    MehlerRequest,
    MehlerResponse,
    ZetaRequest,
    ZetaResponse,
)
from app.services.hermite_complex import HermiteService, check_regime

logger = logging.getLogger(__name__)

# Degree cap for requests; the schema bounds n by the same value
API_DEGREE_CAP = 5000

router = APIRouter()


def get_hermite_service(convention: Convention = Convention.STANDARD) -> HermiteService:
    return HermiteService(HermiteConfig(n_max=API_DEGREE_CAP, convention=convention))


@router.post("/zeta", response_model=ZetaResponse)
def evaluate_zeta(request: ZetaRequest) -> ZetaResponse:
    """
    Evaluate the normalized Hermite function or its derivative.

    - **n**: Degree (0 to 5000)
    - **z**: Complex point with |z| <= 3
    - **derivative**: Return zeta_n'(z) instead of zeta_n(z)
    - **convention**: "standard" or "alternating" (also spelled "paper_signed")

    Returns the value together with the envelope constants at z.
    """
    service = get_hermite_service(request.convention)
    z = request.z.value
    with service_errors("Hermite evaluation"):
        value = service.eval_zeta_prime(request.n, z) if request.derivative else service.eval_zeta(request.n, z)
        envelope = service.envelope(z, n=max(request.n, 1))
    return ZetaResponse(n=request.n, z=request.z, value=ComplexValue.of(value), envelope=envelope)


@router.post("/bounds", response_model=BoundReport)
def check_bounds(request: BoundsRequest) -> BoundReport:
    """
    Check every Hermite inequality at one (n, z).

    - **n**: Degree (1 to 5000)
    - **z**: Complex point
    - **radius**: Disk radius for C_R (defaults to 3)
    """
    service = get_hermite_service()
    with service_errors("Bound check"):
        return service.check_bounds(request.n, request.z.value, request.radius)


@router.post("/mehler", response_model=MehlerResponse)
def evaluate_mehler(request: MehlerRequest) -> MehlerResponse:
    """
    Compare the truncated Mehler series with the closed-form kernel.

    - **eps**: Parameter with |eps| e^{2 max |Im|} < 1
    - **u/v**: Complex points
    - **n_terms**: Series truncation
    """
    service = get_hermite_service()
    u, v = request.u.value, request.v.value
    with service_errors("Mehler evaluation"):
        check_regime(request.eps, max(abs(u.imag), abs(v.imag)))
        kernel = service.mehler_kernel(request.eps, u, v)
        series = service.mehler_series(request.eps, u, v, request.n_terms)
    return MehlerResponse(
        kernel=ComplexValue.of(kernel),
        series=ComplexValue.of(series),
        deviation=abs(series - kernel),
    )
