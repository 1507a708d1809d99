"""Translate service failures into HTTP errors."""

import logging
from contextlib import contextmanager

from fastapi import HTTPException, status

from app.core.errors import WorkbenchError

logger = logging.getLogger(__name__)


@contextmanager
def service_errors(operation: str):
    """
    Run a service call, mapping WorkbenchError and ValueError to 422.

    Anything else is logged and reported as 500.
    """
    try:
        yield
    except HTTPException:
        raise
    except WorkbenchError as exc:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=exc.to_dict(),
        )
    except ValueError as exc:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail={"code": "invalid_argument", "message": str(exc)},
        )
    except Exception as exc:
        logger.error(f"{operation} failed: {exc}")
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"{operation} failed",
        )
