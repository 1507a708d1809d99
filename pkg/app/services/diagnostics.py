"""Identity scans: Parseval convergence, imaginary-time divergence and Mehler consistency."""

import logging
import math
from typing import Sequence

import numpy as np
from scipy.special import erfi

from app.schemas.diagnostics import (
    DivergenceReport,
    DivergenceRow,
    MehlerReport,
    ParsevalReport,
    ParsevalRow,
)
from app.services.hermite_complex import (
    check_eps,
    check_regime,
    mehler_double_integral,
    mehler_kernel,
    mehler_series,
    segment_integral_table,
    zeta_table,
)
from app.services.quadrature import composite_nodes

logger = logging.getLogger(__name__)

# Absolute accuracy of the antiderivatives feeding the scans
SCAN_TOL = 1e-12

RATIO_EPS = (0.5, 0.95)


def parseval_scan(t: float, n_list: Sequence[int], tol: float = SCAN_TOL) -> ParsevalReport:
    """
    Partial sums S_N = sum over n <= N of (integral of zeta_n over [0,t])^2.

    For real t the full sum is t, so S_N rises to t from below.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    n_values = sorted({int(n) for n in n_list})
    if not n_values or n_values[0] < 0:
        raise ValueError("n_list must hold nonnegative degrees")

    coefficients = segment_integral_table(n_values[-1], 0.0, t, tol).real
    partial = np.cumsum(coefficients * coefficients)

    rows = [ParsevalRow(N=n, partial_sum=float(partial[n]), gap=t - float(partial[n])) for n in n_values]
    sums = [row.partial_sum for row in rows]
    report = ParsevalReport(
        t=t,
        rows=rows,
        monotone=all(a <= b for a, b in zip(sums, sums[1:])),
        bessel_ok=all(s <= t + tol for s in sums),
    )
    logger.info(f"Parseval scan at t={t}: S_{n_values[-1]} = {sums[-1]:.6f}")
    return report


def divergence_lower_bound(T: float, eps: float) -> float:
    """
    T^2 (pi (1-eps^2))^{-1/2} (integral over [0,1] of e^{b t^2} dt)^2, b = (1+eps^2) T^2 / (2 (1-eps^2)).

    The inner integral is sqrt(pi) erfi(sqrt(b)) / (2 sqrt(b)).
    """
    check_eps(eps)
    one_minus = 1.0 - eps * eps
    b = (1.0 + eps * eps) * T * T / (2.0 * one_minus)
    root = math.sqrt(b)
    inner = math.sqrt(math.pi) * float(erfi(root)) / (2.0 * root) if root > 0 else 1.0
    return T * T * inner * inner / math.sqrt(math.pi * one_minus)


def divergence_scan(
    T: float,
    eps_grid: Sequence[float],
    n_terms: int,
    tol: float = SCAN_TOL,
) -> DivergenceReport:
    """
    S(eps) = sum over n <= N of eps^n |integral of zeta_n over [0,iT]|^2 across eps.

    The full series equals T^2 times the Mehler double integral at
    (isT, -is'T), which dominates the elementary lower bound and blows up
    as eps -> 1. Divergence is certified by monotone growth plus that
    bound, never by a numerical infinity.
    """
    if T == 0:
        raise ValueError("T must be nonzero")
    eps_values = [float(eps) for eps in eps_grid]
    if any(not 0.0 <= eps < 1.0 for eps in eps_values):
        raise ValueError("eps_grid must lie in [0, 1)")

    coefficients = segment_integral_table(n_terms, 0.0, 1j * T, tol)
    squares = np.abs(coefficients) ** 2
    degrees = np.arange(n_terms + 1)

    rows = []
    for eps in eps_values:
        partial = math.fsum(np.power(eps, degrees) * squares)
        lower = divergence_lower_bound(T, eps)
        exact = mehler_double_integral(eps, 1j * T, -1j * T).real
        allowance = max(0.0, exact - partial)
        if partial < lower:
            logger.warning(f"Truncated S({eps}) = {partial:.4e} is below the lower bound {lower:.4e}")
        rows.append(
            DivergenceRow(
                eps=eps,
                partial_sum=partial,
                lower_bound=lower,
                exact=exact,
                allowance=allowance,
                certified=lower <= (partial + allowance) * (1.0 + 1e-9),
            )
        )

    ordered = sorted(rows, key=lambda row: row.eps)
    sums = {row.eps: row.partial_sum for row in rows}
    low, high = RATIO_EPS
    ratio = sums[high] / sums[low] if low in sums and high in sums and sums[low] > 0 else None

    report = DivergenceReport(
        T=T,
        N=n_terms,
        rows=rows,
        monotone=all(a.partial_sum < b.partial_sum for a, b in zip(ordered, ordered[1:])),
        certified=all(row.certified for row in rows),
        growth_ratio=ratio,
    )
    logger.info(f"Divergence scan at T={T}, N={n_terms}: monotone={report.monotone}, ratio={ratio}")
    return report


def mehler_consistency(
    eps: float,
    pairs: Sequence[tuple[complex, complex]],
    n_terms: int,
    panels: int = 8,
) -> MehlerReport:
    """
    Compare the truncated Mehler series with the closed form over point pairs.

    Also checks, for every distinct first coordinate z, that the double
    integral of the series over [0,z]^2 equals sum of eps^n c_n(z)^2.

    Raises:
        RegimeError: Unless |eps| e^{2 max|Im|} < 1
    """
    u = np.array([complex(a) for a, _ in pairs], dtype=complex)
    v = np.array([complex(b) for _, b in pairs], dtype=complex)
    height = float(max(np.max(np.abs(u.imag)), np.max(np.abs(v.imag)))) if u.size else 0.0
    check_regime(eps, height)

    kernel = mehler_kernel(eps, u, v)
    series = mehler_series(eps, u, v, n_terms)
    asymmetry = max(
        float(np.max(np.abs(kernel - mehler_kernel(eps, v, u)), initial=0.0)),
        float(np.max(np.abs(series - mehler_series(eps, v, u, n_terms)), initial=0.0)),
    )

    nodes, weights = composite_nodes(0.0, 1.0, panels)
    powers = np.power(float(eps), np.arange(n_terms + 1))
    identity_gap = 0.0
    for z in sorted(set(u.tolist()), key=lambda w: (w.real, w.imag)):
        if z == 0:
            continue
        table = zeta_table(n_terms, z * nodes)
        double = z * z * (weights @ (table.T * powers) @ table @ weights)
        c = segment_integral_table(n_terms, 0.0, z, SCAN_TOL)
        identity_gap = max(identity_gap, abs(double - np.sum(powers * c * c)))

    report = MehlerReport(
        eps=eps,
        N=n_terms,
        points=int(u.size),
        max_deviation=float(np.max(np.abs(series - kernel), initial=0.0)),
        literal_prefactor_deviation=float(np.max(np.abs(series - kernel / math.sqrt(2.0)), initial=0.0)),
        max_asymmetry=asymmetry,
        identity_gap=float(identity_gap),
    )
    logger.info(f"Mehler consistency at eps={eps}: deviation {report.max_deviation:.3e}")
    return report
