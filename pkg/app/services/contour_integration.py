"""Wick-product contour stochastic integrals by refinement-convergent Riemann sums, and the Ito checks."""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from app.core.config import MAX_REFINEMENT_LEVEL
from app.core.errors import WorkbenchError
from app.schemas.common import ComplexValue
from app.schemas.integration import (
    IntegralReport,
    ItoCorrection,
    ItoRealReport,
    ItoRegularizedReport,
    LevelRecord,
    RefinementScheme,
)
from app.schemas.process import ProcessKind, ProcessSpec, TruncationPlan
from app.services.chaos_algebra import (
    ChaosVector,
    MultiIndex,
    b_weight_log,
    norm_minus,
    pointwise_product_order1,
)
from app.services.hermite_complex import (
    OutsideDiskError,
    check_regime,
    mehler_double_integral,
    zeta_table,
)
from app.services.processes import (
    BROWNIAN,
    brownian_coeffs,
    path_array,
    regularization_factors,
    regularized_coeffs,
)
from app.services.quadrature import composite_nodes

logger = logging.getLogger(__name__)

# Endpoints closer than this are treated as the same point
JOIN_TOLERANCE = 1e-12

# Largest |A + A^T| accepted as antisymmetric
ANTISYMMETRY_TOLERANCE = 1e-9

# Regularized identities need |eps| e^{2|Im z|} below 1/1.01
REGIME_MARGIN = 1.01

ARC_SAMPLES = 1025

# Noise matrices with more entries than this are rebuilt rather than cached
NOISE_CACHE_ENTRIES = 1 << 18


class NoConvergenceError(WorkbenchError):
    """Raised when the Cauchy criterion is not met by the refinement cap."""

    code = "no_convergence"

    def __init__(self, tol: float, level: int, residual: float):
        self.tol = tol
        self.level = level
        self.residual = residual
        super().__init__(
            f"Riemann sums did not converge to tol={tol:g} by level {level} "
            f"(last residual {residual:.3e})"
        )


class ContourParseError(WorkbenchError):
    """Raised when a contour description cannot be parsed."""

    code = "contour_parse_error"

    def __init__(self, text: str, reason: str):
        self.text = text
        super().__init__(f"Cannot parse contour '{text}': {reason}")


def _format(value: complex | float) -> str:
    value = complex(value)
    if value.imag == 0:
        return f"{value.real:g}"
    return f"{value.real:g}{value.imag:+g}j"


@dataclass(frozen=True)
class Segment:
    """gamma(t) = a + t (b - a) on [0, 1]."""

    a: complex
    b: complex

    def gamma(self, t: np.ndarray) -> np.ndarray:
        return self.a + np.asarray(t) * (self.b - self.a)

    def gamma_prime(self, t: np.ndarray) -> np.ndarray:
        return np.full(np.shape(t), self.b - self.a, dtype=complex)

    @property
    def start(self) -> complex:
        return self.a

    @property
    def end(self) -> complex:
        return self.b

    def reversed(self) -> "Segment":
        return Segment(self.b, self.a)

    def halves(self) -> tuple["Segment", "Segment"]:
        mid = 0.5 * (self.a + self.b)
        return Segment(self.a, mid), Segment(mid, self.b)

    def max_modulus(self) -> float:
        return max(abs(self.a), abs(self.b))

    @property
    def label(self) -> str:
        return f"segment:{_format(self.a)},{_format(self.b)}"


@dataclass(frozen=True)
class Arc:
    """gamma(t) = c + r exp(i (theta0 + t (theta1 - theta0))) on [0, 1]."""

    center: complex
    radius: float
    theta0: float
    theta1: float

    def _phase(self, t: np.ndarray) -> np.ndarray:
        return np.exp(1j * (self.theta0 + np.asarray(t) * (self.theta1 - self.theta0)))

    def gamma(self, t: np.ndarray) -> np.ndarray:
        return self.center + self.radius * self._phase(t)

    def gamma_prime(self, t: np.ndarray) -> np.ndarray:
        return 1j * self.radius * (self.theta1 - self.theta0) * self._phase(t)

    @property
    def start(self) -> complex:
        return complex(self.gamma(0.0))

    @property
    def end(self) -> complex:
        return complex(self.gamma(1.0))

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0)

    def halves(self) -> tuple["Arc", "Arc"]:
        mid = 0.5 * (self.theta0 + self.theta1)
        return (
            Arc(self.center, self.radius, self.theta0, mid),
            Arc(self.center, self.radius, mid, self.theta1),
        )

    def max_modulus(self) -> float:
        t = np.linspace(0.0, 1.0, ARC_SAMPLES)
        return float(np.max(np.abs(self.gamma(t))))

    @property
    def label(self) -> str:
        return f"arc:{_format(self.center)},{self.radius:g},{self.theta0:g},{self.theta1:g}"


Piece = Segment | Arc


@dataclass(frozen=True)
class Contour:
    """A piecewise-smooth path; each piece is parametrized over [0, 1]."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("A contour needs at least one piece")

    @classmethod
    def segment(cls, a: complex, b: complex) -> "Contour":
        return cls((Segment(complex(a), complex(b)),))

    @classmethod
    def arc(cls, center: complex, radius: float, theta0: float, theta1: float) -> "Contour":
        if radius <= 0:
            raise ValueError("Arc radius must be positive")
        return cls((Arc(complex(center), float(radius), float(theta0), float(theta1)),))

    @classmethod
    def polyline(cls, points: Sequence[complex]) -> "Contour":
        points = [complex(z) for z in points]
        if len(points) < 2:
            raise ValueError("A polyline needs at least two points")
        return cls(tuple(Segment(a, b) for a, b in zip(points[:-1], points[1:])))

    @property
    def start(self) -> complex:
        return self.pieces[0].start

    @property
    def end(self) -> complex:
        return self.pieces[-1].end

    @property
    def label(self) -> str:
        return ";".join(piece.label for piece in self.pieces)

    def reversed(self) -> "Contour":
        return Contour(tuple(piece.reversed() for piece in reversed(self.pieces)))

    def concat(self, other: "Contour") -> "Contour":
        if abs(self.end - other.start) > JOIN_TOLERANCE:
            raise ValueError(f"Contours do not join: {self.end} != {other.start}")
        return Contour(self.pieces + other.pieces)

    def split(self) -> tuple["Contour", "Contour"]:
        """Two contours whose concatenation is this one."""
        if len(self.pieces) > 1:
            cut = len(self.pieces) // 2
            return Contour(self.pieces[:cut]), Contour(self.pieces[cut:])
        first, second = self.pieces[0].halves()
        return Contour((first,)), Contour((second,))

    def radius(self) -> float:
        """Radius of the smallest centered disk containing the image."""
        return max(piece.max_modulus() for piece in self.pieces)


def _parse_numbers(text: str, args: str) -> list[complex]:
    try:
        return [complex(item.strip().replace(" ", "")) for item in args.split(",") if item.strip()]
    except ValueError as exc:
        raise ContourParseError(text, str(exc)) from exc


def parse_contour(text: str) -> Contour:
    """
    Parse 'segment:a,b', 'arc:c,r,theta0,theta1' or 'polyline:z0,z1,...'.

    Pieces joined by ';' are concatenated. Numbers use Python complex
    syntax, e.g. 0.5j or 1+2j.

    Raises:
        ContourParseError: On unknown kinds, wrong argument counts or gaps
    """
    contour = None
    for part in text.split(";"):
        kind, sep, args = part.strip().partition(":")
        if not sep:
            raise ContourParseError(text, f"missing ':' in '{part}'")
        numbers = _parse_numbers(text, args)
        kind = kind.strip().lower()

        try:
            if kind == "segment":
                if len(numbers) != 2:
                    raise ContourParseError(text, "segment takes 2 points")
                piece = Contour.segment(*numbers)
            elif kind == "arc":
                if len(numbers) != 4 or any(value.imag for value in numbers[1:]):
                    raise ContourParseError(text, "arc takes a center and 3 real numbers")
                piece = Contour.arc(numbers[0], *(value.real for value in numbers[1:]))
            elif kind == "polyline":
                piece = Contour.polyline(numbers)
            else:
                raise ContourParseError(text, f"unknown kind '{kind}'")
            contour = piece if contour is None else contour.concat(piece)
        except ValueError as exc:
            raise ContourParseError(text, str(exc)) from exc

    return contour


@lru_cache(maxsize=16)
def _unit_keys(n_terms: int) -> tuple[MultiIndex, ...]:
    return tuple(MultiIndex.unit(n) for n in range(n_terms + 1))


@dataclass(frozen=True)
class IntegrandField:
    """
    Catalog of continuous integrands f(z) on the disk.

    kinds: constant vector, z -> scale B_z, z -> scale B_{z,eps}, and
    linear combinations of those.
    """

    kind: str
    scale: complex = 1.0
    eps: float = 0.0
    vector: ChaosVector | None = None
    terms: tuple[tuple[complex, "IntegrandField"], ...] = field(default_factory=tuple)

    @classmethod
    def constant(cls, vector: ChaosVector) -> "IntegrandField":
        return cls(kind="constant", vector=vector)

    @classmethod
    def brownian(cls, scale: complex = 1.0) -> "IntegrandField":
        return cls(kind="brownian", scale=complex(scale))

    @classmethod
    def regularized(cls, eps: float, scale: complex = 1.0) -> "IntegrandField":
        if not 0.0 <= eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")
        return cls(kind="regularized", scale=complex(scale), eps=float(eps))

    @classmethod
    def combination(cls, *pairs: tuple[complex, "IntegrandField"]) -> "IntegrandField":
        return cls(kind="combination", terms=tuple((complex(a), f) for a, f in pairs))

    @property
    def label(self) -> str:
        if self.kind == "constant":
            return f"constant[{len(self.vector)}]"
        if self.kind == "combination":
            return "+".join(f"({_format(a)})*{f.label}" for a, f in self.terms)
        name = "B" if self.kind == "brownian" else f"B_eps={self.eps:g}"
        return name if self.scale == 1 else f"{_format(self.scale)}*{name}"

    def _spec(self) -> ProcessSpec:
        if self.kind == "regularized":
            return ProcessSpec(kind=ProcessKind.REGULARIZED, eps=self.eps)
        return BROWNIAN

    def evaluate(self, z: complex, plan: TruncationPlan) -> ChaosVector:
        """f(z) as a ChaosVector."""
        if self.kind == "constant":
            return self.vector
        if self.kind == "brownian":
            return brownian_coeffs(z, plan) * self.scale
        if self.kind == "regularized":
            return regularized_coeffs(z, self.eps, plan) * self.scale
        total = ChaosVector.zero()
        for a, term in self.terms:
            total = total + term.evaluate(z, plan) * a
        return total

    def matrix(self, points: np.ndarray, plan: TruncationPlan) -> tuple[tuple[MultiIndex, ...], np.ndarray]:
        """
        f at consecutive points as a dense (points x support) matrix.

        Returns:
            Tuple of (support keys in sorted order, matrix)
        """
        if self.kind == "constant":
            keys = tuple(self.vector.support())
            row = np.array([self.vector.coefficient(alpha) for alpha in keys], dtype=complex)
            return keys, np.tile(row, (points.size, 1))
        if self.kind in ("brownian", "regularized"):
            return _unit_keys(plan.N), self.scale * path_array(points, plan, self._spec())

        parts = [(a, *term.matrix(points, plan)) for a, term in self.terms]
        keys = tuple(sorted({alpha for _, ks, _ in parts for alpha in ks}, key=MultiIndex.sort_key))
        column = {alpha: j for j, alpha in enumerate(keys)}
        matrix = np.zeros((points.size, len(keys)), dtype=complex)
        for a, ks, values in parts:
            matrix[:, [column[alpha] for alpha in ks]] += a * values
        return keys, matrix


@lru_cache(maxsize=32)
def _product_layout(keys: tuple[MultiIndex, ...], n_terms: int, p: int):
    """Keys alpha + e_n in sorted order, the index of each (alpha, n) pair, and b^{-p} per key."""
    pairs = [[alpha + MultiIndex.unit(n) for n in range(n_terms + 1)] for alpha in keys]
    targets = sorted({gamma for row in pairs for gamma in row}, key=MultiIndex.sort_key)
    index = {gamma: i for i, gamma in enumerate(targets)}
    ids = np.array([[index[gamma] for gamma in row] for row in pairs], dtype=np.intp).reshape(
        len(keys), n_terms + 1
    )
    weights = np.array([math.exp(-p * b_weight_log(gamma)) for gamma in targets])
    return tuple(targets), ids, weights


def _noise_matrix(piece: Piece, panels: int, n_terms: int, eps: float | None) -> np.ndarray:
    """N_{gamma(t_i)} (or N_{gamma(t_i), eps}) at the panel midpoints, row per node."""
    if panels * (n_terms + 1) > NOISE_CACHE_ENTRIES:
        return _build_noise_matrix(piece, panels, n_terms, eps)
    return _cached_noise_matrix(piece, panels, n_terms, eps)


def _build_noise_matrix(piece: Piece, panels: int, n_terms: int, eps: float | None) -> np.ndarray:
    t = (np.arange(panels) + 0.5) / panels
    noise = zeta_table(n_terms, piece.gamma(t)).T
    if eps is not None:
        noise = noise * regularization_factors(eps, n_terms)
    noise.setflags(write=False)
    return noise


_cached_noise_matrix = lru_cache(maxsize=64)(_build_noise_matrix)


def _riemann_sum(
    integrand: IntegrandField,
    contour: Contour,
    plan: TruncationPlan,
    panels: int,
    noise_eps: float | None,
    track_stability: bool,
) -> tuple[ChaosVector, float | None]:
    """Midpoint sum over panels per piece of f(gamma) * N_gamma gamma'(t) / panels."""
    totals: dict[MultiIndex, complex] = {}
    bound = 0.0 if track_stability else None
    t = (np.arange(panels) + 0.5) / panels

    for piece in contour.pieces:
        points = piece.gamma(t)
        keys, values = integrand.matrix(points, plan)
        if not keys:
            continue
        noise = _noise_matrix(piece, panels, plan.N, noise_eps)
        step = piece.gamma_prime(t) / panels
        targets, ids, weights = _product_layout(keys, plan.N, plan.p)

        block = (values * step[:, None]).T @ noise
        coefficients = np.zeros(len(targets), dtype=complex)
        np.add.at(coefficients, ids.ravel(), block.ravel())
        for gamma, value in zip(targets, coefficients):
            totals[gamma] = totals.get(gamma, 0j) + value

        if track_stability:
            # max over nodes of ||f(gamma) * N_gamma gamma'||_{-p}; each piece has length 1
            flat = ids.ravel()
            worst = 0.0
            for i in range(panels):
                local = np.outer(values[i], noise[i]).ravel() * (step[i] * panels)
                agg_re = np.bincount(flat, weights=local.real, minlength=len(targets))
                agg_im = np.bincount(flat, weights=local.imag, minlength=len(targets))
                worst = max(worst, math.sqrt(math.fsum((agg_re**2 + agg_im**2) * weights)))
            bound += worst

    return ChaosVector(totals), bound


@dataclass
class WickIntegral:
    """Result of integrate_wick with its refinement history."""

    value: ChaosVector
    contour: Contour
    integrand: IntegrandField
    scheme: RefinementScheme
    plan: TruncationPlan
    tol: float
    levels: list[LevelRecord]

    @property
    def panels(self) -> int:
        return self.levels[-1].panels

    @property
    def stable(self) -> bool | None:
        checked = [r for r in self.levels if r.stability_bound is not None]
        if not checked:
            return None
        return all(r.norm <= r.stability_bound * (1.0 + 1e-12) + 1e-15 for r in checked)

    def report(self) -> IntegralReport:
        return IntegralReport(
            contour_id=self.contour.label,
            integrand=self.integrand.label,
            scheme=self.scheme,
            p=self.plan.p,
            N=self.plan.N,
            tol=self.tol,
            panels=self.panels,
            levels=self.levels,
            stable=self.stable,
            terms=len(self.value),
            result=self.value.to_document(),
        )


def integrate_wick(
    integrand: IntegrandField,
    contour: Contour,
    plan: TruncationPlan,
    tol: float | None = None,
    scheme: RefinementScheme = RefinementScheme.DYADIC,
    noise_eps: float | None = None,
    track_stability: bool = False,
    max_level: int = MAX_REFINEMENT_LEVEL,
) -> WickIntegral:
    """
    Integral over the contour of f(z) * N_z dz in F_{-p}.

    Midpoint Riemann sums with factor**j panels per piece are refined until
    two consecutive sums differ by at most tol in ||.||_{-p}, checked from
    level 2 on. noise_eps replaces N_z by the regularized noise
    sum of eps^{n/2} zeta_n(z) Z_n.

    Raises:
        OutsideDiskError: If the contour leaves the plan's disk
        NoConvergenceError: If the criterion still fails at max_level
    """
    tol = plan.tol if tol is None else tol
    scheme = RefinementScheme(scheme)
    reach = contour.radius()
    if reach > plan.R * (1.0 + 1e-12):
        raise OutsideDiskError(complex(reach), plan.R)

    levels: list[LevelRecord] = []
    previous = None
    residual = math.inf

    for level in range(max_level + 1):
        panels = scheme.factor**level
        current, bound = _riemann_sum(integrand, contour, plan, panels, noise_eps, track_stability)
        residual = None if previous is None else norm_minus(current - previous, plan.p)
        levels.append(
            LevelRecord(
                level=level,
                panels=panels,
                cauchy_residual=residual,
                norm=norm_minus(current, plan.p) if track_stability else None,
                stability_bound=bound,
            )
        )

        if level >= 2 and residual <= tol:
            if level == max_level:
                logger.warning(f"Cauchy criterion met only at the finest allowed level {level}")
            logger.info(
                f"Integral of {integrand.label} over {contour.label} converged at "
                f"{panels} panels ({scheme.value}), residual {residual:.3e}"
            )
            return WickIntegral(current, contour, integrand, scheme, plan, tol, levels)
        previous = current

    raise NoConvergenceError(tol, max_level, residual if residual is not None else math.inf)


def antisymmetry_matrix(t: float, plan: TruncationPlan, panels: int | None = None) -> np.ndarray:
    """
    A_{n,m} = c_n(t) c_m(t) - 2 integral over [0,t] of c_n(u) zeta_m(u) du, n, m <= N.

    c_n(u) is the integral of zeta_n over [0,u]. Integration by parts makes
    A + A^T vanish.
    """
    if panels is None:
        panels = max(16, math.ceil(abs(t) * (2.0 * math.sqrt(2.0 * plan.N + 1.0) + 4.0 * plan.R)))
    nodes, weights = composite_nodes(0.0, t, panels)

    # The chain ends at t, so c(t) shares its quadrature with the nodes
    chain = path_array(np.append(nodes, t), plan, tol=1e-14)
    antiderivatives, at_t = chain[:-1], chain[-1]
    noise = zeta_table(plan.N, nodes.astype(complex)).T

    integrals = (antiderivatives * weights[:, None]).T @ noise
    return np.outer(at_t, at_t) - 2.0 * integrals


def ito_check_real(t: float, plan: TruncationPlan, tol: float | None = None) -> ItoRealReport:
    """
    B_t^2 against 2 times the integral of B_u * N_u over [0,t] plus t.

    The constant terms differ by the Parseval truncation gap, so the
    residual is bounded by tol plus that gap.
    """
    if not 0.0 < t <= plan.R:
        raise ValueError(f"t must lie in (0, R={plan.R}]")
    tol = plan.tol if tol is None else tol

    b_t = brownian_coeffs(t, plan)
    lhs = pointwise_product_order1(b_t, b_t)
    integral = integrate_wick(IntegrandField.brownian(scale=2.0), Contour.segment(0.0, t), plan, tol)
    rhs = integral.value + ChaosVector.unit_element() * t
    residual = norm_minus(lhs - rhs, plan.p)

    coefficients = b_t.order1_array(plan.N + 1)
    parseval_gap = abs(math.fsum(np.real(coefficients * coefficients)) - t)

    matrix = antisymmetry_matrix(t, plan)
    antisymmetry_max = float(np.max(np.abs(matrix + matrix.T)))

    report = ItoRealReport(
        t=t,
        p=plan.p,
        N=plan.N,
        residual_norm=residual,
        antisymmetry_max=antisymmetry_max,
        parseval_gap=parseval_gap,
        tol=tol,
        ok=residual <= tol + parseval_gap and antisymmetry_max <= ANTISYMMETRY_TOLERANCE,
        levels=len(integral.levels),
    )
    logger.info(
        f"Real Ito check at t={t}: residual {residual:.3e}, gap {parseval_gap:.3e}, "
        f"antisymmetry {antisymmetry_max:.3e}"
    )
    return report


def ito_correction(z: complex, eps: float, plan: TruncationPlan) -> ItoCorrection:
    """
    Correction term of the regularized Ito formula, w = z.

    series: sum over n <= N of eps^n (integral of zeta_n over [0,z])^2, no conjugation.
    closed form: z^2 times the double integral of the Mehler kernel over [0,1]^2.

    Raises:
        RegimeError: Outside 1.01 |eps| e^{2|Im z|} < 1
    """
    z = complex(z)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    check_regime(eps, abs(z.imag), REGIME_MARGIN)

    coefficients = brownian_coeffs(z, plan).order1_array(plan.N + 1)
    terms = np.power(float(eps), np.arange(plan.N + 1)) * coefficients * coefficients
    series = complex(math.fsum(terms.real), math.fsum(terms.imag))
    closed = mehler_double_integral(eps, z, z)

    return ItoCorrection(
        z=ComplexValue.of(z),
        eps=eps,
        series=ComplexValue.of(series),
        closed_form=ComplexValue.of(closed),
        literal_variant=ComplexValue.of(closed / math.sqrt(2.0)),
        gap=abs(series - closed),
    )


def ito_check_regularized(
    z: complex,
    eps: float,
    plan: TruncationPlan,
    tol: float | None = None,
) -> ItoRegularizedReport:
    """
    B_{z,eps}^2 against 2 times the integral of B_{u,eps} * N_{u,eps} over [0,z] plus the correction.

    N_{u,eps} is the derivative of B_{u,eps}. The series correction makes the
    constant terms agree exactly, so the residual is integration error only.
    """
    z = complex(z)
    tol = plan.tol if tol is None else tol
    correction = ito_correction(z, eps, plan)

    b_z = regularized_coeffs(z, eps, plan)
    lhs = pointwise_product_order1(b_z, b_z)
    integral = integrate_wick(
        IntegrandField.regularized(eps, scale=2.0),
        Contour.segment(0.0, z),
        plan,
        tol,
        noise_eps=eps,
    )
    rhs = integral.value + ChaosVector.unit_element() * correction.series.value
    residual = norm_minus(lhs - rhs, plan.p)

    logger.info(f"Regularized Ito check at z={z}, eps={eps}: residual {residual:.3e}")
    return ItoRegularizedReport(
        z=ComplexValue.of(z),
        eps=eps,
        p=plan.p,
        N=plan.N,
        residual_norm=residual,
        correction=correction,
        tol=tol,
        ok=residual <= 2.0 * tol,
        levels=len(integral.levels),
    )
