"""Normalized Hermite functions over the complex plane, their bounds, and the Mehler kernel."""

import logging
import math
import time
from typing import Callable

import numpy as np
from scipy.special import gammaln

from app.core.config import BOUNDARY_SAMPLES, MAGNITUDE_CAP
from app.core.errors import WorkbenchError
from app.schemas.common import ComplexValue
from app.schemas.hermite import (
    BoundEnvelope,
    BoundReport,
    Convention,
    EnvelopeComparison,
    GridCertificate,
    HermiteConfig,
    RecurrenceResiduals,
    StirlingReport,
)
from app.services.quadrature import adaptive_gauss_legendre, composite_nodes

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
PI_QUARTER_INV = math.pi ** -0.25
LOG_PI = math.log(math.pi)
LOG2 = math.log(2.0)

# c_0 = (2e^3/pi^2)^(1/4)
LOG_C0 = 0.25 * math.log(2.0 * math.e**3 / math.pi**2)

# Additive slack for log-domain comparisons (rounding only)
LOG_SLACK = 1e-12

Weight = Callable[[np.ndarray], np.ndarray]


class DegreeOverflowError(WorkbenchError):
    """Raised when a degree exceeds the configured cap."""

    code = "degree_overflow"

    def __init__(self, n: int, n_max: int):
        self.n = n
        self.n_max = n_max
        super().__init__(f"Degree {n} exceeds n_max={n_max}")


class HermiteOverflowError(WorkbenchError):
    """Raised when a recurrence value leaves the representable range."""

    code = "hermite_overflow"

    def __init__(self, peak: float, cap: float):
        self.peak = peak
        self.cap = cap
        super().__init__(f"Hermite magnitude {peak:.3e} exceeds cap {cap:.3e}")


class OutsideDiskError(WorkbenchError):
    """Raised when a point lies outside the evaluation disk."""

    code = "outside_disk"

    def __init__(self, z: complex, radius: float):
        self.z = z
        self.radius = radius
        super().__init__(f"|z|={abs(z):.6g} exceeds radius {radius:.6g}")


class EpsOutOfRangeError(WorkbenchError):
    """Raised when the Mehler parameter is not in (-1, 1)."""

    code = "eps_out_of_range"

    def __init__(self, eps: float):
        self.eps = eps
        super().__init__(f"Mehler parameter eps={eps} must satisfy |eps| < 1")


class RegimeError(WorkbenchError):
    """Raised when eps lies outside the convergence region |eps| e^{2h} < 1."""

    code = "regime_error"

    def __init__(self, eps: float, height: float, margin: float):
        self.eps = eps
        self.height = height
        self.margin = margin
        super().__init__(
            f"eps={eps} outside the convergence region for imaginary height "
            f"{height:.6g} (requires {margin:g}*|eps|*exp(2h) < 1)"
        )


def _degree_column(count: int, ndim: int) -> np.ndarray:
    return np.arange(count).reshape((-1,) + (1,) * ndim)


def _guard(table: np.ndarray, magnitude_cap: float) -> None:
    if not table.size:
        return
    if not np.all(np.isfinite(table)):
        raise HermiteOverflowError(math.inf, magnitude_cap)
    peak = float(np.max(np.abs(table)))
    if peak > magnitude_cap:
        raise HermiteOverflowError(peak, magnitude_cap)


def zeta_table(n_max: int, z, magnitude_cap: float = MAGNITUDE_CAP) -> np.ndarray:
    """
    Evaluate zeta_0, ..., zeta_{n_max} at z by the upward three-term recurrence.

    zeta_{n+1} = sqrt(2/(n+1)) z zeta_n - sqrt(n/(n+1)) zeta_{n-1}, seeded with
    zeta_0 = pi^{-1/4} exp(-z^2/2) and zeta_1 = sqrt(2) z zeta_0 (standard
    convention, no (-1)^n factor).

    Args:
        n_max: Highest degree
        z: Complex scalar or array
        magnitude_cap: Largest magnitude tolerated before raising

    Returns:
        Array of shape (n_max + 1,) + shape(z)

    Raises:
        HermiteOverflowError: If a value exceeds magnitude_cap or overflows
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")

    z = np.asarray(z, dtype=complex)
    table = np.empty((n_max + 1,) + z.shape, dtype=complex)

    with np.errstate(over="ignore", invalid="ignore"):
        table[0] = PI_QUARTER_INV * np.exp(-0.5 * z * z)
        if n_max >= 1:
            table[1] = SQRT2 * z * table[0]
        for n in range(1, n_max):
            table[n + 1] = (
                math.sqrt(2.0 / (n + 1)) * z * table[n]
                - math.sqrt(n / (n + 1)) * table[n - 1]
            )

    _guard(table, magnitude_cap)
    return table


def derivative_from_table(table: np.ndarray, z) -> np.ndarray:
    """zeta_n' = -z zeta_n + sqrt(2n) zeta_{n-1}, row by row."""
    z = np.asarray(z, dtype=complex)
    prime = -z * table
    if table.shape[0] > 1:
        factors = np.sqrt(2.0 * _degree_column(table.shape[0], z.ndim)[1:])
        prime[1:] += factors * table[:-1]
    return prime


def zeta_prime_table(n_max: int, z, magnitude_cap: float = MAGNITUDE_CAP) -> np.ndarray:
    """Derivatives zeta_0', ..., zeta_{n_max}' at z."""
    return derivative_from_table(zeta_table(n_max, z, magnitude_cap), z)


def apply_convention(table: np.ndarray, convention: Convention) -> np.ndarray:
    """Flip the sign of odd degrees for the alternating convention."""
    if convention == Convention.ALTERNATING:
        ndim = table.ndim - 1
        signs = np.where(_degree_column(table.shape[0], ndim) % 2 == 0, 1.0, -1.0)
        return table * signs
    return table


def segment_integral_table(
    n_max: int,
    a: complex,
    b: complex,
    tol: float,
    weight: Weight | None = None,
    magnitude_cap: float = MAGNITUDE_CAP,
) -> np.ndarray:
    """
    Integrate w(u) zeta_n(u) along the straight segment [a, b] for all n <= n_max.

    The segment is pulled back to [0, 1] through u = a + t (b - a) and
    integrated by adaptive Gauss-Legendre. The integrands are entire, so the
    result equals the integral along any path from a to b.

    Args:
        n_max: Highest degree
        a, b: Segment end points
        tol: Absolute error target per degree
        weight: Optional analytic multiplier w(u); None means w = 1

    Returns:
        Complex array of length n_max + 1
    """
    a = complex(a)
    b = complex(b)
    delta = b - a
    if delta == 0:
        return np.zeros(n_max + 1, dtype=complex)

    def integrand(t: np.ndarray) -> np.ndarray:
        u = a + t * delta
        values = zeta_table(n_max, u, magnitude_cap)
        if weight is not None:
            values = values * weight(u)
        return values * delta

    total, _ = adaptive_gauss_legendre(integrand, 0.0, 1.0, tol)
    return total


def log_c(z):
    """log c_z = log c_0 + |z|^2/2 + x^2 + |y|."""
    z = np.asarray(z, dtype=complex)
    return LOG_C0 + 0.5 * np.abs(z) ** 2 + z.real**2 + np.abs(z.imag)


def log_radius_constant(radius: float, samples: int = BOUNDARY_SAMPLES) -> tuple[float, float]:
    """
    log C_R from a polar sample of the closed disk, cross-checked in closed form.

    On |z| = R the exponent x^2 + |y| peaks at R^2 + 1/4 when R >= 1/2 and at
    R otherwise; c_z grows radially, so the boundary carries the maximum.

    Returns:
        Tuple of (log C_R, closed-form log C_R); the first is the larger of the two
    """
    theta = 2.0 * np.pi * np.arange(samples) / samples
    radii = radius * np.linspace(0.0, 1.0, 17)
    disk = radii[:, None] * np.exp(1j * theta)[None, :]
    sampled = float(np.max(log_c(disk)))

    tail = radius * radius + 0.25 if radius >= 0.5 else radius
    closed = LOG_C0 + 0.5 * radius * radius + tail
    return max(sampled, closed), closed


def log_k(n):
    """log K_n with K_n = (2e/pi)^{1/4} ((2n)!)^{1/4} (2n+1)^{-n/2-1/4} e^{n/2}."""
    n = np.asarray(n, dtype=float)
    return (
        0.25 * math.log(2.0 * math.e / math.pi)
        + 0.25 * gammaln(2.0 * n + 1.0)
        - (0.5 * n + 0.25) * np.log(2.0 * n + 1.0)
        + 0.5 * n
    )


def _log_abs(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


def bound_margins(table: np.ndarray, prime: np.ndarray, z, radius: float) -> dict[str, np.ndarray]:
    """
    Log margins (log right-hand side minus log left-hand side) of each inequality.

    Rows follow the degree axis of table. A margin >= -LOG_SLACK means the
    inequality holds. Exact zeros give +inf margins.
    """
    z = np.asarray(z, dtype=complex)
    n = _degree_column(table.shape[0], z.ndim).astype(float)
    y = np.abs(z.imag)
    abs_z = np.abs(z)

    log_zeta = _log_abs(table)
    log_prime = _log_abs(prime)
    log_fact = gammaln(n + 1.0)
    growth = 2.0 * n * y
    envelope = log_c(z) + growth

    # |H_n| recovered from zeta_n through the normalization
    log_hermite = (
        log_zeta + 0.25 * LOG_PI + 0.5 * n * LOG2 + 0.5 * log_fact + 0.5 * np.real(z * z)
    )

    with np.errstate(divide="ignore"):
        log_radius = math.log(radius)

    return {
        "zeta": envelope - log_zeta,
        "zeta_prime": envelope + np.log1p(np.sqrt(2.0 * n)) - log_prime,
        "zeta_prime_sharp": (
            envelope + np.log1p(np.sqrt(2.0 * n) * np.exp(-2.0 * y)) - log_prime
        ),
        "em": 0.5 * n * LOG2 + 0.5 * log_fact + np.sqrt(2.0 * n) * abs_z - log_hermite,
        "hille": log_fact + radius * abs_z + 0.5 * n - n * log_radius - log_hermite,
    }


def polar_grid(radius: float, points_per_axis: int = 21) -> np.ndarray:
    """points_per_axis radii (0..R) times points_per_axis angles, flattened."""
    radii = np.linspace(0.0, radius, points_per_axis)
    theta = 2.0 * np.pi * np.arange(points_per_axis) / points_per_axis
    return (radii[:, None] * np.exp(1j * theta)[None, :]).ravel()


def certify_grid(
    n_max: int,
    radius: float,
    points_per_axis: int = 21,
) -> tuple[GridCertificate, list[dict]]:
    """
    Certify the Hermite envelopes for 1 <= n <= n_max on a polar grid of the disk.

    Returns:
        Tuple of (certificate, per-point rows with worst margins over n)
    """
    started = time.perf_counter()
    z = polar_grid(radius, points_per_axis)
    table = zeta_table(n_max, z)
    prime = derivative_from_table(table, z)
    margins = {key: value[1:] for key, value in bound_margins(table, prime, z, radius).items()}
    worst = {key: np.min(value, axis=0) for key, value in margins.items()}

    rows = [
        {
            "re_z": float(point.real),
            "im_z": float(point.imag),
            "zeta_margin": float(worst["zeta"][i]),
            "zeta_prime_margin": float(worst["zeta_prime"][i]),
            "em_margin": float(worst["em"][i]),
            "hille_margin": float(worst["hille"][i]),
        }
        for i, point in enumerate(z)
    ]

    certificate = GridCertificate(
        n_max=n_max,
        radius=radius,
        points=int(z.size),
        zeta_ok=bool(np.all(worst["zeta"] >= -LOG_SLACK)),
        zeta_prime_ok=bool(np.all(worst["zeta_prime"] >= -LOG_SLACK)),
        em_ok=bool(np.all(worst["em"] >= -LOG_SLACK)),
        hille_ok=bool(np.all(worst["hille"] >= -LOG_SLACK)),
        worst_zeta_margin=float(np.min(worst["zeta"])),
        worst_zeta_prime_margin=float(np.min(worst["zeta_prime"])),
    )
    logger.info(
        f"Certified n<={n_max} on {certificate.points} points of |z|<={radius}: "
        f"zeta_ok={certificate.zeta_ok} zeta_prime_ok={certificate.zeta_prime_ok} "
        f"in {time.perf_counter() - started:.2f}s"
    )
    return certificate, rows


def orthonormality_gram(n_max: int, half_width: float = 12.0, tol: float = 1e-10) -> np.ndarray:
    """Gram matrix of zeta_0..zeta_{n_max} on [-half_width, half_width]."""

    def integrand(x: np.ndarray) -> np.ndarray:
        table = zeta_table(n_max, x).real
        return table[:, None, :] * table[None, :, :]

    gram, _ = adaptive_gauss_legendre(integrand, -half_width, half_width, tol)
    return gram


def recurrence_residuals(n_max: int, points) -> RecurrenceResiduals:
    """
    Relative residuals of the derivative and three-term recurrences.

    Each residual is scaled by the sum of magnitudes of the terms involved.
    """
    z = np.asarray(points, dtype=complex).ravel()
    table = zeta_table(n_max + 1, z)
    prime = derivative_from_table(table, z)[: n_max + 1]
    current = table[: n_max + 1]
    following = table[1:]
    n = _degree_column(n_max + 1, 1).astype(float)
    tiny = np.finfo(float).tiny

    up = z * current - np.sqrt(2.0 * (n + 1.0)) * following
    up_scale = np.abs(prime) + np.abs(z * current) + np.abs(np.sqrt(2.0 * (n + 1.0)) * following)

    preceding = np.zeros_like(current)
    preceding[1:] = table[: n_max]
    rhs = np.sqrt(n / 2.0) * preceding + np.sqrt((n + 1.0) / 2.0) * following
    three_scale = (
        np.abs(z * current)
        + np.abs(np.sqrt(n / 2.0) * preceding)
        + np.abs(np.sqrt((n + 1.0) / 2.0) * following)
    )

    # Finite differences give an independent check of the first recurrence
    h = 1e-5
    shifted = (zeta_table(n_max, z + h) - zeta_table(n_max, z - h)) / (2.0 * h)
    down_scale = np.abs(z * current) + np.abs(np.sqrt(2.0 * n) * preceding) + np.abs(shifted)

    return RecurrenceResiduals(
        derivative_down=float(np.max(np.abs(shifted - prime) / np.maximum(down_scale, tiny))),
        derivative_up=float(np.max(np.abs(up - prime) / np.maximum(up_scale, tiny))),
        three_term=float(np.max(np.abs(z * current - rhs) / np.maximum(three_scale, tiny))),
    )


def stirling_sandwich(n_max: int = 170) -> StirlingReport:
    """Check sqrt(2 pi) n^{n+1/2} e^{-n} e^{1/(12n+1)} <= n! <= ... e^{1/(12n)} in log domain."""
    n = np.arange(1, n_max + 1, dtype=float)
    base = 0.5 * math.log(2.0 * math.pi) + (n + 0.5) * np.log(n) - n
    log_fact = gammaln(n + 1.0)

    lower = log_fact - (base + 1.0 / (12.0 * n + 1.0))
    upper = (base + 1.0 / (12.0 * n)) - log_fact

    return StirlingReport(
        n_max=n_max,
        sharp_ok=bool(np.all(lower >= 0.0) and np.all(upper >= 0.0)),
        relaxed_ok=bool(np.all(log_fact >= base) and np.all(base + 1.0 >= log_fact)),
        worst_lower_margin=float(np.min(lower)),
        worst_upper_margin=float(np.min(upper)),
    )


def compare_envelopes(n: int, z: complex, radius: float | None = None) -> EnvelopeComparison:
    """
    Compare c_z e^{2n|Im z|} with the envelope built from the Hille-type bound.

    The second one is e^{R^2/2 + R|z|} pi^{-1/4} (e^{1/2} / (sqrt(2) R))^n (n!)^{1/2}.
    """
    z = complex(z)
    if radius is None:
        radius = abs(z) if z != 0 else 1.0

    strip_envelope = float(log_c(z)) + 2.0 * n * abs(z.imag)
    hille = (
        0.5 * radius * radius
        + radius * abs(z)
        - 0.25 * LOG_PI
        + n * (0.5 - 0.5 * LOG2 - math.log(radius))
        + 0.5 * float(gammaln(n + 1.0))
    )
    return EnvelopeComparison(
        n=n,
        z=ComplexValue.of(z),
        radius=radius,
        log_strip_envelope=strip_envelope,
        log_hille_envelope=hille,
        strip_smaller=strip_envelope < hille,
    )


def check_eps(eps: float) -> None:
    if not abs(eps) < 1.0:
        raise EpsOutOfRangeError(eps)


def check_regime(eps: float, height: float, margin: float = 1.0) -> None:
    """Require |eps| < 1 and margin * |eps| * e^{2 height} < 1."""
    check_eps(eps)
    if not margin * abs(eps) * math.exp(2.0 * height) < 1.0:
        raise RegimeError(eps, height, margin)


def mehler_kernel(eps: float, u, v):
    """(pi (1-eps^2))^{-1/2} exp(-[(1+eps^2)(u^2+v^2) - 4uv eps] / (2(1-eps^2)))."""
    check_eps(eps)
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    one_minus = 1.0 - eps * eps
    exponent = -((1.0 + eps * eps) * (u * u + v * v) - 4.0 * u * v * eps) / (2.0 * one_minus)
    return np.exp(exponent) / math.sqrt(math.pi * one_minus)


def mehler_series(eps: float, u, v, n_terms: int):
    """Truncated sum over n <= n_terms of eps^n zeta_n(u) zeta_n(v)."""
    check_eps(eps)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=complex), np.asarray(v, dtype=complex))
    powers = np.power(float(eps), _degree_column(n_terms + 1, u.ndim))
    return np.sum(powers * zeta_table(n_terms, u) * zeta_table(n_terms, v), axis=0)


def mehler_double_integral(eps: float, z: complex, w: complex, panels: int = 8) -> complex:
    """
    z w times the integral over [0,1]^2 of the Mehler kernel at (s z, s' w).

    With w = z this is the double integral over [0,z] x [0,z]; with
    w = conj(z) it is the Hermitian form of the imaginary-time argument.
    """
    nodes, weights = composite_nodes(0.0, 1.0, panels)
    kernel = mehler_kernel(eps, complex(z) * nodes[:, None], complex(w) * nodes[None, :])
    return complex(z) * complex(w) * complex(weights @ kernel @ weights)


class HermiteService:
    """
    Validated entry points for Hermite evaluation.

    Enforces the degree cap, the evaluation disk and the sign convention of
    the configuration; the module-level functions do the arithmetic.
    """

    def __init__(self, config: HermiteConfig | None = None):
        self.config = config or HermiteConfig()

    def _check_degree(self, n: int) -> None:
        if n < 0:
            raise ValueError("Degree must be non-negative")
        if n > self.config.n_max:
            raise DegreeOverflowError(n, self.config.n_max)

    def _check_point(self, z: complex) -> None:
        if abs(z) > self.config.radius_cap * (1.0 + 1e-12):
            raise OutsideDiskError(z, self.config.radius_cap)

    def _signed(self, table: np.ndarray) -> np.ndarray:
        return apply_convention(table, self.config.convention)

    def eval_zeta(self, n: int, z: complex) -> complex:
        """zeta_n(z) under the configured convention."""
        self._check_degree(n)
        self._check_point(z)
        table = zeta_table(n, z, self.config.magnitude_cap)
        return complex(self._signed(table)[n])

    def eval_zeta_prime(self, n: int, z: complex) -> complex:
        """zeta_n'(z) = -z zeta_n(z) + sqrt(2n) zeta_{n-1}(z)."""
        self._check_degree(n)
        self._check_point(z)
        prime = zeta_prime_table(n, z, self.config.magnitude_cap)
        return complex(self._signed(prime)[n])

    def antiderivative(self, n: int, z: complex, tol: float | None = None) -> complex:
        """Integral of zeta_n over the segment [0, z]."""
        self._check_degree(n)
        self._check_point(z)
        values = segment_integral_table(
            n, 0.0, z, tol or self.config.quad_tol, magnitude_cap=self.config.magnitude_cap
        )
        return complex(self._signed(values)[n])

    def envelope(self, z: complex, radius: float | None = None, n: int = 1) -> BoundEnvelope:
        """Constants c_z, C_R and K_n."""
        radius = radius if radius is not None else self.config.radius_cap
        if abs(z) > radius * (1.0 + 1e-12):
            raise OutsideDiskError(z, radius)

        log_cz = float(log_c(z))
        log_cr, closed = log_radius_constant(radius)
        log_kn = float(log_k(n))
        return BoundEnvelope(
            c_z=math.exp(log_cz),
            C_R=math.exp(log_cr),
            K_n=math.exp(log_kn),
            log_c_z=log_cz,
            log_C_R=log_cr,
            log_K_n=log_kn,
            C_R_closed_form=math.exp(closed),
        )

    def check_bounds(self, n: int, z: complex, radius: float | None = None) -> BoundReport:
        """Evaluate every Hermite inequality at (n, z) in log domain."""
        if n < 1:
            raise ValueError("Bounds are stated for n >= 1")
        self._check_degree(n)
        self._check_point(z)
        radius = radius if radius is not None else self.config.radius_cap
        if abs(z) > radius * (1.0 + 1e-12):
            raise OutsideDiskError(z, radius)

        table = zeta_table(n, z, self.config.magnitude_cap)
        prime = derivative_from_table(table, z)
        margins = {key: float(value[n]) for key, value in bound_margins(table, prime, z, radius).items()}

        return BoundReport(
            n=n,
            z=ComplexValue.of(z),
            zeta_ok=margins["zeta"] >= -LOG_SLACK,
            zeta_prime_ok=margins["zeta_prime"] >= -LOG_SLACK,
            zeta_prime_sharp_ok=margins["zeta_prime_sharp"] >= -LOG_SLACK,
            em_ok=margins["em"] >= -LOG_SLACK,
            hille_ok=margins["hille"] >= -LOG_SLACK,
            zeta_margin=margins["zeta"],
            zeta_prime_margin=margins["zeta_prime"],
        )

    def mehler_kernel(self, eps: float, u: complex, v: complex) -> complex:
        return complex(mehler_kernel(eps, u, v))

    def mehler_series(self, eps: float, u: complex, v: complex, n_terms: int) -> complex:
        self._check_degree(n_terms)
        return complex(mehler_series(eps, u, v, n_terms))
