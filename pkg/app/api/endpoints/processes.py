"""Truncation plans and process coefficient endpoints."""

import logging

from fastapi import APIRouter

from app.api.errors import service_errors
from app.schemas.common import ComplexValue
from app.schemas.process import CoefficientsRequest, CoefficientsResponse, PlanRequest, TruncationPlan
from app.services.processes import order1_norm, plan, process_array

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/plan", response_model=TruncationPlan)
def make_plan(request: PlanRequest) -> TruncationPlan:
    """
    Choose the graded order p and truncation N for a disk.

    - **radius**: Disk radius R
    - **tol**: Target tolerance for the truncation tail
    - **n_terms/p**: Optional fixed values instead of the planned ones
    """
    with service_errors("Planning"):
        return plan(request.radius, request.tol, n_terms=request.n_terms, p=request.p)


@router.post("/coefficients", response_model=CoefficientsResponse)
def coefficients(request: CoefficientsRequest) -> CoefficientsResponse:
    """
    Order-1 chaos coefficients of a process at z.

    - **z**: Point inside the planned disk
    - **spec**: Process kind (brownian, white_noise, weighted, regularized) and its parameters

    Returns the coefficients c_0..c_N and their ||.||_{-p} norm.
    """
    with service_errors("Coefficient evaluation"):
        chosen = plan(request.radius, request.tol, n_terms=request.n_terms, p=request.p)
        values = process_array(request.z.value, chosen, request.spec)
    logger.info(f"Coefficients of {request.spec.kind.value} at {request.z.value} with N={chosen.N}")
    return CoefficientsResponse(
        plan=chosen,
        spec=request.spec,
        z=request.z,
        coefficients=[ComplexValue.of(value) for value in values],
        norm_minus=order1_norm(values, chosen.p),
    )
