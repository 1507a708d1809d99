"""Gauss-Legendre quadrature for vector-valued integrands on real intervals."""

import logging
from typing import Callable

import numpy as np

from app.core.config import GAUSS_POINTS, QUADRATURE_MAX_DEPTH
from app.core.errors import WorkbenchError

logger = logging.getLogger(__name__)

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_POINTS)

# Estimates below this multiple of the rounding level are accepted as converged
ROUNDING_FLOOR = 64 * np.finfo(float).eps

Integrand = Callable[[np.ndarray], np.ndarray]


class ToleranceNotMetError(WorkbenchError):
    """Raised when adaptive subdivision exceeds the depth cap."""

    code = "tolerance_not_met"

    def __init__(self, tol: float, depth: int, interval: tuple[float, float]):
        self.tol = tol
        self.depth = depth
        self.interval = interval
        super().__init__(
            f"Quadrature tolerance {tol:g} not met after {depth} subdivisions "
            f"on [{interval[0]:.6g}, {interval[1]:.6g}]"
        )


def gauss_legendre_panel(func: Integrand, a: float, b: float) -> np.ndarray:
    """
    Apply the fixed Gauss-Legendre rule on one panel.

    Args:
        func: Maps an array of nodes t to values with nodes on the last axis
        a, b: Panel end points

    Returns:
        Integral estimate with the node axis contracted
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    values = func(mid + half * _NODES)
    return half * (values @ _WEIGHTS)


def adaptive_gauss_legendre(
    func: Integrand,
    a: float,
    b: float,
    tol: float,
    max_depth: int = QUADRATURE_MAX_DEPTH,
) -> tuple[np.ndarray, float]:
    """
    Integrate a vector-valued function by dyadic panel subdivision.

    A panel is accepted when its two halves agree with the whole within the
    share of tol proportional to its width. The error criterion is the
    maximum over all components, so one call certifies every component.

    Args:
        func: Vectorized integrand, nodes on the last axis
        a, b: Interval end points (a < b)
        tol: Absolute error target for every component
        max_depth: Subdivision depth cap

    Returns:
        Tuple of (integral, accumulated error estimate)

    Raises:
        ToleranceNotMetError: If some panel needs more than max_depth halvings
    """
    width = b - a
    whole = gauss_legendre_panel(func, a, b)
    if width == 0:
        return whole, 0.0

    total = np.zeros_like(whole)
    error = 0.0
    stack = [(a, b, whole, 0)]

    while stack:
        lo, hi, estimate, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = gauss_legendre_panel(func, lo, mid)
        right = gauss_legendre_panel(func, mid, hi)
        refined = left + right

        diff = float(np.max(np.abs(refined - estimate)))
        scale = float(np.max(np.abs(refined))) if refined.size else 0.0
        local_tol = tol * (hi - lo) / width

        if diff <= local_tol or diff <= ROUNDING_FLOOR * scale:
            total = total + refined
            error += diff
            continue

        if depth >= max_depth:
            raise ToleranceNotMetError(tol, depth, (lo, hi))

        # Left half is processed first
        stack.append((mid, hi, right, depth + 1))
        stack.append((lo, mid, left, depth + 1))

    return total, error


def composite_nodes(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of the composite Gauss-Legendre rule on [a, b].

    Args:
        a, b: Interval end points
        panels: Number of equal panels

    Returns:
        Tuple of (nodes, weights), both of length panels * GAUSS_POINTS
    """
    if panels < 1:
        raise ValueError("panels must be >= 1")

    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    weights = (half[:, None] * _WEIGHTS[None, :]).ravel()
    return nodes, weights
