"""Shared fixtures: truncation plans reused across the service tests."""

import pytest

from app.services.processes import plan


@pytest.fixture(scope="session")
def unit_plan():
    """Tail-driven plan on the unit disk: p = 6, N = 186."""
    return plan(1.0, 1e-6)


@pytest.fixture(scope="session")
def short_plan():
    """Unit disk with the series cut at N = 64."""
    return plan(1.0, 1e-6, n_terms=64)


@pytest.fixture(scope="session")
def long_plan():
    """Unit disk with N = 2048 for covariance sums."""
    return plan(1.0, 1e-6, n_terms=2048)
