"""Complex-time Brownian motion, white noise, weighted and regularized processes as order-1 chaos vectors."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from app.core.config import P_MARGIN
from app.core.errors import WorkbenchError
from app.schemas.common import ComplexValue
from app.schemas.process import (
    AnalyticityReport,
    ContinuityReport,
    CovarianceReport,
    MembershipReport,
    ProcessKind,
    ProcessSpec,
    TruncationPlan,
    WeightFamily,
)
from app.services.artifacts import write_csv
from app.services.chaos_algebra import ChaosVector, norm_minus, pairing
from app.services.hermite_complex import (
    OutsideDiskError,
    log_radius_constant,
    segment_integral_table,
    zeta_table,
)
from app.services.quadrature import adaptive_gauss_legendre, composite_nodes

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)

# Monte Carlo substreams are per block, so results do not depend on the worker count
BLOCK_SIZE = 1024
CSV_HEADER = ("re_z", "im_z", "sample_id", "re_B", "im_B")

MAX_TERMS = 100_000
DIRECTIONS = {"+h": 1.0 + 0j, "-h": -1.0 + 0j, "+ih": 1j, "-ih": -1j}

BROWNIAN = ProcessSpec()


class InfeasiblePlanError(WorkbenchError):
    """Raised when no (p, N) satisfies the truncation contract."""

    code = "infeasible_plan"


def _log_tail(log_c_r: float, p: int, log_q: float, n_terms: int) -> float:
    """log of C_R^2 2^{-p} q^{N+1} / (1 - q)."""
    return 2.0 * log_c_r - p * LOG2 + (n_terms + 1) * log_q - math.log(-math.expm1(log_q))


def plan(
    R: float,
    tol: float,
    n_terms: int | None = None,
    p: int | None = None,
) -> TruncationPlan:
    """
    Choose the graded order p and truncation N for the disk |z| <= R.

    p is the smallest integer with 2^p > 1.1 e^{4R}; N is the smallest
    degree whose geometric tail C_R^2 sum_{n>N} e^{4Rn} 2^{-(n+1)p} is at
    most tol^2.

    Args:
        R: Disk radius
        tol: Target tolerance
        n_terms: Fixed N instead of the tail-driven one
        p: Fixed graded order instead of the minimal one

    Returns:
        TruncationPlan

    Raises:
        InfeasiblePlanError: If a fixed p violates e^{4R} < 2^p or N would exceed MAX_TERMS
    """
    if R <= 0 or tol <= 0:
        raise ValueError("R and tol must be positive")

    if p is None:
        threshold = math.log(P_MARGIN) + 4.0 * R
        p = max(1, math.floor(threshold / LOG2))
        while p * LOG2 <= threshold:
            p += 1
    elif 4.0 * R >= p * LOG2:
        raise InfeasiblePlanError(f"p={p} violates e^(4R) < 2^p for R={R}")

    log_q = 4.0 * R - p * LOG2
    log_c_r, _ = log_radius_constant(R)
    target = 2.0 * math.log(tol)

    if n_terms is None:
        needed = (target - 2.0 * log_c_r + p * LOG2 + math.log(-math.expm1(log_q))) / log_q
        n_terms = max(0, math.ceil(needed) - 1)
        while n_terms > 0 and _log_tail(log_c_r, p, log_q, n_terms - 1) <= target:
            n_terms -= 1
        while _log_tail(log_c_r, p, log_q, n_terms) > target:
            n_terms += 1
        if n_terms > MAX_TERMS:
            raise InfeasiblePlanError(f"Truncation N={n_terms} exceeds {MAX_TERMS}")

    log_tail = _log_tail(log_c_r, p, log_q, n_terms)
    chosen = TruncationPlan(
        R=R,
        p=p,
        N=n_terms,
        tol=tol,
        q=math.exp(log_q),
        log_C_R=log_c_r,
        tail_bound=math.exp(log_tail),
        tail_ok=log_tail <= target,
    )
    logger.info(f"Plan for R={R}, tol={tol:g}: p={p}, N={n_terms}, tail={chosen.tail_bound:.3e}")
    return chosen


def tail_bound(plan: TruncationPlan, n_terms: int) -> float:
    return math.exp(_log_tail(plan.log_C_R, plan.p, math.log(plan.q), n_terms))


def geometric_sum(plan: TruncationPlan) -> float:
    """sum over n >= 0 of e^{4Rn} 2^{-(n+1)p} = 2^{-p} / (1 - q)."""
    return 2.0 ** (-plan.p) / (1.0 - plan.q)


def sqrt_weight(spec: ProcessSpec):
    """Analytic square root of the catalog weight m, or None for m = 1."""
    k = spec.k
    if spec.family == WeightFamily.POLYNOMIAL:
        return lambda u: (1.0 + u * u) ** k
    if spec.family == WeightFamily.EXP_PLUS:
        return lambda u: np.exp(0.5 * u ** (2 * k))
    if spec.family == WeightFamily.EXP_MINUS:
        return lambda u: np.exp(-0.5 * u ** (2 * k))
    return None


def _check_disk(z: complex, R: float) -> None:
    if abs(z) > R * (1.0 + 1e-12):
        raise OutsideDiskError(z, R)


def _coefficient_tol(plan: TruncationPlan) -> float:
    return plan.tol / (plan.N + 1)


@lru_cache(maxsize=512)
def _segment_integrals(
    n_terms: int, a: complex, b: complex, tol: float, family: WeightFamily, k: int
) -> np.ndarray:
    weight = sqrt_weight(ProcessSpec(kind=ProcessKind.WEIGHTED, family=family, k=k))
    values = segment_integral_table(n_terms, a, b, tol, weight)
    values.setflags(write=False)
    return values


def segment_array(
    a: complex,
    b: complex,
    plan: TruncationPlan,
    spec: ProcessSpec = BROWNIAN,
    tol: float | None = None,
) -> np.ndarray:
    """
    Coefficient increments X_b - X_a for an integrated process (degrees 0..N).

    The integrands are entire, so the straight segment [a, b] is as good as
    any path; increments are integrated directly rather than differenced.
    """
    if spec.kind == ProcessKind.WHITE_NOISE:
        raise ValueError("White noise has no segment increments")

    family = spec.family if spec.kind == ProcessKind.WEIGHTED else WeightFamily.UNIT
    values = np.array(
        _segment_integrals(
            plan.N, complex(a), complex(b), tol or _coefficient_tol(plan), family, spec.k
        )
    )
    if spec.kind == ProcessKind.REGULARIZED:
        values *= regularization_factors(spec.eps, plan.N)
    return values


def regularization_factors(eps: float, n_max: int) -> np.ndarray:
    """eps^{n/2} for n = 0..n_max, with 0^0 = 1."""
    return np.power(float(eps), 0.5 * np.arange(n_max + 1))


def process_array(z: complex, plan: TruncationPlan, spec: ProcessSpec = BROWNIAN) -> np.ndarray:
    """Order-1 coefficients of the process at z for degrees 0..N."""
    z = complex(z)
    _check_disk(z, plan.R)
    if spec.kind == ProcessKind.WHITE_NOISE:
        return zeta_table(plan.N, z)
    return segment_array(0.0, z, plan, spec)


def derivative_array(z: complex, plan: TruncationPlan, spec: ProcessSpec = BROWNIAN) -> np.ndarray:
    """Coefficientwise derivative in z of an integrated process: the integrand at z."""
    if spec.kind == ProcessKind.WHITE_NOISE:
        raise ValueError("Derivative of white noise is not an order-1 target here")
    values = zeta_table(plan.N, complex(z))
    if spec.kind == ProcessKind.WEIGHTED:
        weight = sqrt_weight(spec)
        if weight is not None:
            values = values * weight(complex(z))
    elif spec.kind == ProcessKind.REGULARIZED:
        values = values * regularization_factors(spec.eps, plan.N)
    return values


def brownian_array(z: complex, plan: TruncationPlan) -> np.ndarray:
    return process_array(z, plan, BROWNIAN)


# Complex entries per vectorized recurrence chunk
_CHUNK_ENTRIES = 4_000_000


def path_array(
    points: Sequence[complex],
    plan: TruncationPlan,
    spec: ProcessSpec = BROWNIAN,
    tol: float | None = None,
) -> np.ndarray:
    """
    Coefficients of an integrated process at consecutive points, row per point.

    The first point is reached from 0 by adaptive quadrature; each later one
    adds the integral over the chord from its predecessor, computed with a
    fixed composite Gauss-Legendre rule fine enough for the oscillation of
    zeta_N. Chords stay in the disk, so path independence applies.
    """
    points = np.asarray([complex(z) for z in points], dtype=complex)
    if points.size == 0:
        return np.zeros((0, plan.N + 1), dtype=complex)
    for z in points:
        _check_disk(z, plan.R)
    if spec.kind == ProcessKind.WHITE_NOISE:
        raise ValueError("White noise is not an integrated process")

    family_spec = spec if spec.kind == ProcessKind.WEIGHTED else BROWNIAN
    weight = sqrt_weight(family_spec)
    first = segment_array(0.0, points[0], plan, family_spec, tol=tol)

    starts = points[:-1]
    steps = points[1:] - starts
    rows = np.empty((points.size, plan.N + 1), dtype=complex)
    rows[0] = first
    if steps.size:
        frequency = math.sqrt(2.0 * plan.N + 1.0) + 2.0 * plan.R
        panels = max(1, math.ceil(float(np.max(np.abs(steps))) * frequency / 2.0))
        nodes, weights = composite_nodes(0.0, 1.0, panels)
        chunk = max(1, _CHUNK_ENTRIES // ((plan.N + 1) * nodes.size))

        carry = first
        for lo in range(0, steps.size, chunk):
            a = starts[lo : lo + chunk, None]
            delta = steps[lo : lo + chunk, None]
            u = a + delta * nodes[None, :]
            values = zeta_table(plan.N, u)
            if weight is not None:
                values = values * weight(u)
            increments = (values * (delta * weights[None, :])).sum(axis=-1).T
            cumulative = carry + np.cumsum(increments, axis=0)
            rows[lo + 1 : lo + 1 + cumulative.shape[0]] = cumulative
            carry = cumulative[-1]

    if spec.kind == ProcessKind.REGULARIZED:
        rows *= regularization_factors(spec.eps, plan.N)
    return rows


def brownian_coeffs(z: complex, plan: TruncationPlan) -> ChaosVector:
    """B_z = sum over n <= N of (integral of zeta_n over [0,z]) Z_n."""
    return ChaosVector.from_order1(brownian_array(z, plan))


def white_noise_coeffs(z: complex, plan: TruncationPlan) -> ChaosVector:
    """N_z = sum over n <= N of zeta_n(z) Z_n."""
    return ChaosVector.from_order1(process_array(z, plan, ProcessSpec(kind=ProcessKind.WHITE_NOISE)))


def weighted_coeffs(z: complex, spec: ProcessSpec, plan: TruncationPlan) -> ChaosVector:
    """X_z = sum over n <= N of (integral of sqrt(m) zeta_n over [0,z]) Z_n."""
    if spec.kind not in (ProcessKind.WEIGHTED, ProcessKind.BROWNIAN):
        raise ValueError(f"weighted_coeffs needs a weighted spec, got {spec.kind.value}")
    return ChaosVector.from_order1(process_array(z, plan, spec))


def regularized_coeffs(z: complex, eps: float, plan: TruncationPlan) -> ChaosVector:
    """B_{z,eps} = sum over n <= N of eps^{n/2} (integral of zeta_n over [0,z]) Z_n."""
    spec = ProcessSpec(kind=ProcessKind.REGULARIZED, eps=eps)
    return ChaosVector.from_order1(process_array(z, plan, spec))


def order1_norm(values: np.ndarray, p: int) -> float:
    """||sum c_n Z_n||_{-p} for an order-1 coefficient array."""
    return norm_minus(ChaosVector.from_order1(values), p)


def analyticity_bound_constant(plan: TruncationPlan) -> float:
    """C_R (sum over n <= N of (1+sqrt(2n))^2 e^{4nR} 2^{-(n+1)p})^{1/2}."""
    n = np.arange(plan.N + 1, dtype=float)
    logs = 2.0 * np.log1p(np.sqrt(2.0 * n)) + 4.0 * n * plan.R - (n + 1.0) * plan.p * LOG2
    return math.exp(plan.log_C_R + 0.5 * float(logsumexp(logs)))


def analyticity_check(
    z0: complex,
    h_list: Sequence[float],
    plan: TruncationPlan,
    spec: ProcessSpec = BROWNIAN,
) -> AnalyticityReport:
    """
    Difference quotients of X_z at z0 in four directions against its derivative.

    The derivative of B_z is N_z; weighted processes pick up sqrt(m(z0)).
    Residuals are measured in ||.||_{-p} and their decay order is the
    least-squares slope of log residual against log h.
    """
    z0 = complex(z0)
    h_values = [float(h) for h in h_list]
    if not h_values or min(h_values) <= 0:
        raise ValueError("h_list must hold positive step sizes")
    _check_disk(z0, plan.R - max(h_values))

    target = derivative_array(z0, plan, spec)
    residuals: dict[str, list[float]] = {}
    smallest: dict[str, np.ndarray] = {}

    for label, direction in DIRECTIONS.items():
        residuals[label] = []
        for h in h_values:
            step = direction * h
            increment = segment_array(z0, z0 + step, plan, spec, tol=1e-12 * h)
            quotient = increment / step
            residuals[label].append(order1_norm(quotient - target, plan.p))
            if h == min(h_values):
                smallest[label] = quotient

    log_h = np.log(h_values)
    orders = {}
    for label, values in residuals.items():
        if len(h_values) > 1 and min(values) > 0:
            orders[label] = float(np.polyfit(log_h, np.log(values), 1)[0])
        else:
            orders[label] = None
    known = [order for order in orders.values() if order is not None]

    h_min = min(h_values)
    reference = smallest["+h"]
    spread = max(order1_norm(q - reference, plan.p) for q in smallest.values())

    constant = None
    bound_ok = None
    if spec.kind != ProcessKind.WEIGHTED:
        constant = analyticity_bound_constant(plan)
        bound_ok = all(
            r <= constant * h + 2.0 * plan.tol
            for values in residuals.values()
            for r, h in zip(values, h_values)
        )
        scale = constant
    else:
        # Empirical constant from the coarsest step
        h_max = max(h_values)
        scale = max(values[h_values.index(h_max)] for values in residuals.values()) / h_max

    report = AnalyticityReport(
        z0=ComplexValue.of(z0),
        h_values=h_values,
        residuals=residuals,
        orders=orders,
        observed_order=min(known) if known else None,
        bound_constant=constant,
        bound_ok=bound_ok,
        direction_spread=spread,
        directions_agree=spread <= 2.0 * scale * h_min + 2.0 * plan.tol,
    )
    logger.info(f"Analyticity at z0={z0}: observed order {report.observed_order}")
    return report


def continuity_check(z1: complex, z2: complex, plan: TruncationPlan) -> ContinuityReport:
    """
    ||B_{z1} - B_{z2}||_{-p} against |z1-z2| max(R,1) C_R (2^{-p}/(1-q))^{1/2} + 2 tol.
    """
    z1 = complex(z1)
    z2 = complex(z2)
    _check_disk(z1, plan.R)
    _check_disk(z2, plan.R)

    distance = order1_norm(brownian_array(z1, plan) - brownian_array(z2, plan), plan.p)
    bound = (
        abs(z1 - z2) * max(plan.R, 1.0) * math.exp(plan.log_C_R) * math.sqrt(geometric_sum(plan))
        + 2.0 * plan.tol
    )
    return ContinuityReport(
        z1=ComplexValue.of(z1),
        z2=ComplexValue.of(z2),
        distance=distance,
        bound=bound,
        ok=distance <= bound,
    )


def covariance_operator(z: complex, w: complex, f: ChaosVector, plan: TruncationPlan) -> ChaosVector:
    """(B_z (x) conj(B_w)) f = <f, B_w> B_z, where <f, g> conjugates g."""
    scalar = pairing(f, brownian_coeffs(w, plan))
    return brownian_coeffs(z, plan) * scalar


def _weight_integral(upper: float, spec: ProcessSpec, tol: float) -> float:
    root = sqrt_weight(spec)
    if root is None:
        return upper

    def integrand(u: np.ndarray) -> np.ndarray:
        return np.real(root(u.astype(complex)) ** 2)

    total, _ = adaptive_gauss_legendre(integrand, 0.0, upper, tol)
    return float(total)


def covariance_sum(
    t: float,
    s: float,
    plan: TruncationPlan,
    spec: ProcessSpec = BROWNIAN,
) -> CovarianceReport:
    """Sum over n <= N of coeff_n(t) coeff_n(s) against the integral of m over [0, min(t,s)]."""
    if t < 0 or s < 0:
        raise ValueError("covariance_sum takes nonnegative real times")

    series = np.sum(process_array(t, plan, spec) * process_array(s, plan, spec))
    exact = _weight_integral(min(t, s), spec, 1e-12)
    return CovarianceReport(
        t=t,
        s=s,
        N=plan.N,
        series=float(series.real),
        exact=exact,
        gap=exact - float(series.real),
    )


def membership_check(points: Sequence[complex], plan: TruncationPlan) -> MembershipReport:
    """
    Check ||B_z||_{-p} <= R C_R (2^{-p}/(1-q))^{1/2} + tol and |c_n| <= R C_R e^{2Rn}.
    """
    c_r = math.exp(plan.log_C_R)
    norm_bound = plan.R * c_r * math.sqrt(geometric_sum(plan)) + plan.tol
    log_coefficient_bound = math.log(plan.R) + plan.log_C_R + 2.0 * plan.R * np.arange(plan.N + 1)
    slack = _coefficient_tol(plan)

    max_norm = 0.0
    worst_ratio = 0.0
    coefficient_ok = True
    for z in points:
        values = brownian_array(z, plan)
        max_norm = max(max_norm, order1_norm(values, plan.p))
        bound = np.exp(log_coefficient_bound)
        worst_ratio = max(worst_ratio, float(np.max(np.abs(values) / bound)))
        coefficient_ok = coefficient_ok and bool(np.all(np.abs(values) <= bound + slack))

    return MembershipReport(
        points=len(points),
        max_norm=max_norm,
        norm_bound=norm_bound,
        norm_ok=max_norm <= norm_bound,
        coefficient_ok=coefficient_ok,
        worst_coefficient_ratio=worst_ratio,
    )


@dataclass
class SampleTable:
    """Monte Carlo realizations; values[i, j] is sample i at grid[j]."""

    grid: np.ndarray
    values: np.ndarray
    seed: int

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def rows(self):
        for j, z in enumerate(self.grid):
            for i in range(self.n_samples):
                value = self.values[i, j]
                yield (float(z.real), float(z.imag), i, float(value.real), float(value.imag))

    def to_csv(self, path: str | Path) -> Path:
        return write_csv(path, CSV_HEADER, self.rows())

    def empirical_mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def empirical_covariance(self, i: int, j: int) -> complex:
        """E[(B_i - mean)(B_j - mean)] without conjugation."""
        centered = self.values - self.empirical_mean()
        return complex(np.mean(centered[:, i] * centered[:, j]))


def sample_paths(
    seed: int,
    grid: Sequence[complex],
    plan: TruncationPlan,
    n_samples: int,
    spec: ProcessSpec = BROWNIAN,
    workers: int = 1,
) -> SampleTable:
    """
    Realize the process on a grid from i.i.d. standard normals Z_0..Z_N.

    Blocks of BLOCK_SIZE samples draw from PCG64 substreams spawned off one
    SeedSequence, so the table depends only on the seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")

    points = np.asarray([complex(z) for z in grid], dtype=complex)
    coefficients = np.stack([process_array(z, plan, spec) for z in points])
    blocks = math.ceil(n_samples / BLOCK_SIZE)
    streams = np.random.SeedSequence(seed).spawn(blocks)

    def run_block(index: int) -> np.ndarray:
        size = min(BLOCK_SIZE, n_samples - index * BLOCK_SIZE)
        rng = np.random.Generator(np.random.PCG64(streams[index]))
        normals = rng.standard_normal((size, plan.N + 1))
        return normals @ coefficients.T

    with ThreadPoolExecutor(max_workers=workers) as pool:
        values = np.concatenate(list(pool.map(run_block, range(blocks))), axis=0)

    logger.info(f"Sampled {n_samples} paths on {points.size} points with seed {seed}")
    return SampleTable(grid=points, values=values, seed=seed)
