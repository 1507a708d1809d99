"""Parseval and imaginary-time divergence scans."""

import logging

from fastapi import APIRouter

from app.api.errors import service_errors
from app.schemas.diagnostics import DivergenceReport, DivergenceRequest, ParsevalReport, ParsevalRequest
from app.services.diagnostics import divergence_scan, parseval_scan

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/parseval", response_model=ParsevalReport)
def parseval(request: ParsevalRequest) -> ParsevalReport:
    """
    Partial sums of the squared antiderivatives over [0, t].

    - **t**: Positive real time
    - **n_list**: Truncation degrees to report
    """
    with service_errors("Parseval scan"):
        return parseval_scan(request.t, request.n_list)


@router.post("/divergence", response_model=DivergenceReport)
def divergence(request: DivergenceRequest) -> DivergenceReport:
    """
    Weighted sums S(eps) along the imaginary segment [0, iT].

    - **T**: Imaginary height
    - **eps_grid**: Values in [0, 1)
    - **N**: Series truncation
    """
    with service_errors("Divergence scan"):
        return divergence_scan(request.T, request.eps_grid, request.N)
