import math

import numpy as np
import pytest

from app.services.quadrature import (
    ToleranceNotMetError,
    adaptive_gauss_legendre,
    composite_nodes,
    gauss_legendre_panel,
)


def test_panel_is_exact_for_low_degree_polynomials():
    value = gauss_legendre_panel(lambda t: t**28, 0.0, 1.0)
    assert value == pytest.approx(1.0 / 29.0, rel=1e-13)


def test_adaptive_vector_integrand():
    def integrand(t):
        return np.stack([np.sin(t), np.exp(t), np.cos(40.0 * t)])

    total, error = adaptive_gauss_legendre(integrand, 0.0, 2.0, 1e-12)
    expected = [1.0 - math.cos(2.0), math.exp(2.0) - 1.0, math.sin(80.0) / 40.0]
    np.testing.assert_allclose(total, expected, atol=1e-11)
    assert error <= 1e-11


def test_adaptive_complex_values():
    total, _ = adaptive_gauss_legendre(lambda t: np.exp(1j * t), 0.0, math.pi, 1e-12)
    assert abs(total - 2j) < 1e-11


def test_depth_cap_raises():
    with pytest.raises(ToleranceNotMetError) as excinfo:
        adaptive_gauss_legendre(lambda t: np.abs(t - 0.3) ** 0.5, 0.0, 1.0, 1e-14, max_depth=3)
    assert excinfo.value.code == "tolerance_not_met"


def test_composite_nodes_integrate_gaussian():
    nodes, weights = composite_nodes(-6.0, 6.0, 8)
    assert nodes.size == weights.size == 8 * 15
    assert weights.sum() == pytest.approx(12.0, rel=1e-14)
    assert weights @ np.exp(-nodes**2) == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_composite_nodes_rejects_zero_panels():
    with pytest.raises(ValueError):
        composite_nodes(0.0, 1.0, 0)
