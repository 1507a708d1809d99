"""
Batch driver for the verification suites.

    python -m app.cli bounds --nmax 128 --radius 3 --out runs/bounds

Every subcommand writes manifest.json plus CSV tables into --out and exits
with 0 when all asserted properties hold, 1 when one fails and 2 when the
run aborts on an error.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from pydantic import ValidationError

from app.core.config import DEFAULT_OUT_DIR, LOG_LEVEL, WorkbenchSettings, load_settings
from app.core.errors import WorkbenchError
from app.schemas.integration import RefinementScheme
from app.schemas.process import ProcessKind, ProcessSpec, WeightFamily
from app.services import chaos_algebra, contour_integration, diagnostics, hermite_complex, processes
from app.services.artifacts import write_csv, write_manifest
from app.services.chaos_algebra import ChaosVector, norm_minus
from app.services.contour_integration import IntegrandField

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

# Degree cap when --nmax is omitted; other commands use the tail-driven plan
DEFAULT_NMAX = {
    "bounds": 128,
    "mehler": 200,
    "diverge": 400,
    "ito": 64,
    "parseval": 4096,
    "simulate": 2048,
}

ORTHONORMALITY_DEGREE = 20
ORTHONORMALITY_TOL = 1e-8
RECURRENCE_DEGREE = 64
RECURRENCE_POINTS = 1000
RECURRENCE_TOL = 1e-9
DIFFERENCE_TOL = 1e-6
MEHLER_TOL = 1e-8
PARSEVAL_BAND = 0.05
PARSEVAL_BAND_DEGREE = 4096
GROWTH_RATIO = 10.0
ITO_CORRECTION_TOL = 1e-6
COVARIANCE_TOL = 0.02
COVARIANCE_TERMS = 2048
COVARIANCE_TIMES = (0.5, 1.0)
ANALYTICITY_ORDER = 0.9
ANALYTICITY_STEPS = (1e-2, 1e-3, 1e-4)
ANALYTICITY_POINTS = 5
MEMBERSHIP_POINTS = 100
DIVERGENCE_EPS = (0.1, 0.3, 0.5, 0.7, 0.9, 0.95)


class Run:
    """Collects results and failed properties for one subcommand."""

    def __init__(self, command: str, settings: WorkbenchSettings):
        self.command = command
        self.settings = settings
        self.out = Path(settings.out)
        self.results: dict = {}
        self.failures: list[dict] = []

    def require(self, name: str, passed: bool, detail=None) -> None:
        if not passed:
            logger.warning(f"Property failed: {name} ({detail})")
            self.failures.append({"property": name, "detail": detail})

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        write_csv(self.out / name, header, rows)

    def plan(self, radius: float | None = None, n_terms: int | None = None):
        return processes.plan(
            max(self.settings.radius, radius or 0.0),
            self.settings.tol,
            n_terms=n_terms,
            p=self.settings.p,
        )


def parse_complex(text: str) -> complex:
    try:
        return complex(text.strip().replace(" ", ""))
    except ValueError as exc:
        raise ValueError(f"Not a complex number: '{text}'") from exc


def parse_grid(text: str) -> list[complex]:
    return [parse_complex(item) for item in text.split(",") if item.strip()]


def disk_points(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """Points uniform in the disk |z| <= radius."""
    radii = radius * np.sqrt(rng.uniform(size=count))
    return radii * np.exp(2j * np.pi * rng.uniform(size=count))


def _complex_cells(value: complex) -> tuple[float, float]:
    value = complex(value)
    return value.real, value.imag


def run_bounds(run: Run) -> None:
    settings = run.settings
    certificate, rows = hermite_complex.certify_grid(settings.nmax, settings.radius)
    run.results["certificate"] = certificate
    run.require("zeta_envelope", certificate.zeta_ok, certificate.worst_zeta_margin)
    run.require("zeta_prime_envelope", certificate.zeta_prime_ok, certificate.worst_zeta_prime_margin)
    header = list(rows[0])
    run.csv("bounds_grid.csv", header, ([row[key] for key in header] for row in rows))

    gram = hermite_complex.orthonormality_gram(ORTHONORMALITY_DEGREE)
    deviation = float(np.max(np.abs(gram - np.eye(ORTHONORMALITY_DEGREE + 1))))
    run.results["orthonormality_max_deviation"] = deviation
    run.require("orthonormality", deviation <= ORTHONORMALITY_TOL, deviation)

    degree = min(settings.nmax, RECURRENCE_DEGREE)
    rng = np.random.Generator(np.random.PCG64(settings.seed))
    residuals = hermite_complex.recurrence_residuals(degree, disk_points(rng, RECURRENCE_POINTS, settings.radius))
    run.results["recurrences"] = residuals
    run.require("derivative_down", residuals.derivative_down <= DIFFERENCE_TOL, residuals.derivative_down)
    run.require("derivative_up", residuals.derivative_up <= RECURRENCE_TOL, residuals.derivative_up)
    run.require("three_term", residuals.three_term <= RECURRENCE_TOL, residuals.three_term)

    stirling = hermite_complex.stirling_sandwich()
    run.results["stirling"] = stirling
    run.require("stirling", stirling.sharp_ok and stirling.relaxed_ok)

    # Reported only: neither envelope dominates the other everywhere
    run.results["envelope_comparison"] = [
        hermite_complex.compare_envelopes(32, z) for z in (2.0 + 0j, 2j, 1.0 + 1.0j)
    ]
    run.results["constants"] = {
        "c_0": math.exp(float(hermite_complex.log_c(0.0))),
        "C_R": math.exp(hermite_complex.log_radius_constant(settings.radius)[0]),
    }


def run_spaces(run: Run) -> None:
    report = chaos_algebra.algebra_property_suite(run.settings.seed)
    run.results["algebra"] = report
    laws = report.laws
    run.require("wick_commutative", laws.commutativity_failures == 0, laws.commutativity_failures)
    run.require("wick_associative", laws.associativity_failures == 0, laws.associativity_failures)
    run.require("wick_unit", laws.unit_failures == 0, laws.unit_failures)
    run.require("wick_bilinear", laws.bilinearity_failures == 0, laws.bilinearity_failures)
    run.require("wick_convolution_oracle", laws.oracle_mismatches == 0, laws.oracle_mismatches)
    for row in report.vage:
        run.require(f"vage_{row.p}_{row.q}", row.ok, row.worst_ratio)
    run.require("duality", report.duality_ok, report.duality_worst_ratio)
    run.require("grading", report.grading_ok)
    run.require("weights_superexponential", report.weights_ok)

    run.csv(
        "vage.csv",
        ("p", "q", "constant", "pairs", "worst_ratio"),
        ((row.p, row.q, row.constant, row.pairs, row.worst_ratio) for row in report.vage),
    )
    run.csv("vage_constants.csv", ("l", "A"), ((l, chaos_algebra.vage_constant(l)) for l in range(1, 9)))


def run_process(run: Run) -> None:
    settings = run.settings
    z = parse_complex(settings.z)
    plan = run.plan(abs(z), settings.nmax)
    run.results["plan"] = plan
    weighted_spec = ProcessSpec(kind=ProcessKind.WEIGHTED, family=settings.family, k=settings.k)
    run.results["weight"] = weighted_spec

    brownian = processes.process_array(z, plan)
    noise = processes.process_array(z, plan, ProcessSpec(kind=ProcessKind.WHITE_NOISE))
    weighted = processes.weighted_coeffs(z, weighted_spec, plan).order1_array(plan.N + 1)
    regularized = processes.process_array(z, plan, ProcessSpec(kind=ProcessKind.REGULARIZED, eps=settings.eps))
    run.csv(
        "process_coefficients.csv",
        ("n", "re_B", "im_B", "re_N", "im_N", "re_X", "im_X", "re_B_eps", "im_B_eps"),
        (
            (n, *_complex_cells(b), *_complex_cells(w), *_complex_cells(x), *_complex_cells(r))
            for n, (b, w, x, r) in enumerate(zip(brownian, noise, weighted, regularized))
        ),
    )
    run.results["norms"] = {
        "brownian": processes.order1_norm(brownian, plan.p),
        "white_noise": processes.order1_norm(noise, plan.p),
        "weighted": processes.order1_norm(weighted, plan.p),
        "regularized": processes.order1_norm(regularized, plan.p),
    }

    rng = np.random.Generator(np.random.PCG64(settings.seed))
    analyticity = []
    for z0 in disk_points(rng, ANALYTICITY_POINTS, 0.5):
        for spec in (processes.BROWNIAN, weighted_spec):
            report = processes.analyticity_check(complex(z0), ANALYTICITY_STEPS, plan, spec)
            analyticity.append(report)
            order = report.observed_order
            run.require("analyticity_order", order is not None and order >= ANALYTICITY_ORDER, order)
            run.require("analyticity_directions", report.directions_agree, report.direction_spread)
            run.require("analyticity_bound", report.bound_ok is not False, report.bound_constant)
    run.results["analyticity"] = analyticity

    continuity = processes.continuity_check(z, 0.0, plan)
    membership = processes.membership_check(disk_points(rng, MEMBERSHIP_POINTS, plan.R), plan)
    run.results.update(continuity=continuity, membership=membership)
    run.require("continuity", continuity.ok, continuity.distance)
    run.require("membership_norm", membership.norm_ok, membership.max_norm)
    run.require("membership_coefficients", membership.coefficient_ok, membership.worst_coefficient_ratio)

    # The covariance series converges slowly, so it gets its own long truncation
    long_plan = run.plan(max(COVARIANCE_TIMES), max(settings.nmax or 0, COVARIANCE_TERMS))
    t, s = COVARIANCE_TIMES
    covariance = [processes.covariance_sum(t, s, long_plan, spec) for spec in (processes.BROWNIAN, weighted_spec)]
    run.results["covariance"] = covariance
    for name, report in zip(("brownian", "weighted"), covariance):
        run.require(f"covariance_{name}", abs(report.gap) <= COVARIANCE_TOL * max(1.0, report.exact), report.gap)


def _integrand(settings: WorkbenchSettings) -> IntegrandField:
    if settings.integrand == "unit":
        return IntegrandField.constant(ChaosVector.unit_element())
    if settings.integrand == "brownian":
        return IntegrandField.brownian()
    if settings.integrand == "regularized":
        return IntegrandField.regularized(settings.eps)
    raise ValueError(f"Unknown integrand '{settings.integrand}'")


def run_integrate(run: Run) -> None:
    settings = run.settings
    contour = contour_integration.parse_contour(settings.contour)
    plan = run.plan(contour.radius(), settings.nmax)
    integrand = _integrand(settings)
    tol = settings.tol
    run.results["plan"] = plan

    dyadic = contour_integration.integrate_wick(integrand, contour, plan, tol, track_stability=True)
    triadic = contour_integration.integrate_wick(integrand, contour, plan, tol, RefinementScheme.TRIADIC)
    reverse = contour_integration.integrate_wick(integrand, contour.reversed(), plan, tol)
    first, second = contour.split()
    parts = [contour_integration.integrate_wick(integrand, piece, plan, tol) for piece in (first, second)]

    refinement_gap = norm_minus(dyadic.value - triadic.value, plan.p)
    orientation_gap = norm_minus(dyadic.value + reverse.value, plan.p)
    additivity_gap = norm_minus(dyadic.value - parts[0].value - parts[1].value, plan.p)
    run.results.update(
        integral=dyadic.report(),
        triadic_panels=triadic.panels,
        refinement_gap=refinement_gap,
        orientation_gap=orientation_gap,
        additivity_gap=additivity_gap,
    )
    run.require("refinement_schemes_agree", refinement_gap <= 2.0 * tol, refinement_gap)
    run.require("orientation_reversal", orientation_gap <= 2.0 * tol, orientation_gap)
    run.require("additivity", additivity_gap <= 2.0 * tol, additivity_gap)
    run.require("stability", dyadic.stable is not False)

    run.csv(
        "integral_levels.csv",
        ("scheme", "level", "panels", "cauchy_residual"),
        (
            (result.scheme.value, record.level, record.panels, record.cauchy_residual)
            for result in (dyadic, triadic)
            for record in result.levels
        ),
    )
    run.csv(
        "integral_coefficients.csv",
        ("alpha", "re", "im"),
        ((str(alpha), value.real, value.imag) for alpha, value in dyadic.value.items()),
    )


def run_ito(run: Run) -> None:
    settings = run.settings
    z = parse_complex(settings.z)
    t = settings.T
    plan = run.plan(max(abs(t), abs(z)), settings.nmax)
    run.results["plan"] = plan

    real = [contour_integration.ito_check_real(time, plan, settings.tol) for time in (t, t / 4.0, t / 16.0)]
    for report in real:
        run.require(f"ito_real_t={report.t:g}", report.ok, report.residual_norm)
        run.require(f"antisymmetry_t={report.t:g}", report.antisymmetry_max <= 1e-9, report.antisymmetry_max)

    regularized = contour_integration.ito_check_regularized(z, settings.eps, plan, settings.tol)
    correction = regularized.correction
    run.require("ito_correction", correction.gap <= ITO_CORRECTION_TOL, correction.gap)
    run.require("ito_regularized", regularized.ok, regularized.residual_norm)
    run.results.update(real=real, regularized=regularized)

    run.csv(
        "ito_real.csv",
        ("t", "residual_norm", "parseval_gap", "antisymmetry_max", "levels"),
        ((r.t, r.residual_norm, r.parseval_gap, r.antisymmetry_max, r.levels) for r in real),
    )


def run_mehler(run: Run) -> None:
    settings = run.settings
    eps = settings.eps
    axis = np.linspace(-2.0, 2.0, 9)
    u, v = (grid.ravel().astype(complex) for grid in np.meshgrid(axis, axis, indexing="ij"))
    pairs = list(zip(u.tolist(), v.tolist()))

    report = diagnostics.mehler_consistency(eps, pairs, settings.nmax)
    at_zero = diagnostics.mehler_consistency(0.0, pairs, settings.nmax)
    run.results.update(mehler=report, eps_zero=at_zero)
    run.require("mehler_deviation", report.max_deviation <= MEHLER_TOL, report.max_deviation)
    run.require("mehler_eps_zero", at_zero.max_deviation <= 1e-14, at_zero.max_deviation)
    run.require("mehler_symmetry", report.max_asymmetry <= 1e-12, report.max_asymmetry)
    run.require("mehler_double_integral", report.identity_gap <= MEHLER_TOL, report.identity_gap)

    kernel = hermite_complex.mehler_kernel(eps, u, v)
    series = hermite_complex.mehler_series(eps, u, v, settings.nmax)
    run.csv(
        "mehler.csv",
        ("u", "v", "kernel", "series", "deviation"),
        (
            (a.real, b.real, k.real, s.real, abs(s - k))
            for a, b, k, s in zip(u, v, kernel, series)
        ),
    )


def run_diverge(run: Run) -> None:
    settings = run.settings
    report = diagnostics.divergence_scan(settings.T, DIVERGENCE_EPS, settings.nmax)
    run.results["divergence"] = report
    run.require("divergence_monotone", report.monotone)
    run.require("divergence_lower_bound", report.certified)
    ratio = report.growth_ratio
    run.require("divergence_growth", ratio is not None and ratio >= GROWTH_RATIO, ratio)
    run.csv(
        "divergence.csv",
        ("eps", "partial_sum", "lower_bound", "exact", "allowance"),
        ((r.eps, r.partial_sum, r.lower_bound, r.exact, r.allowance) for r in report.rows),
    )


def run_simulate(run: Run) -> None:
    settings = run.settings
    grid = parse_grid(settings.grid)
    if not grid:
        raise ValueError("--grid needs at least one point")
    plan = run.plan(max(abs(z) for z in grid), settings.nmax)
    run.results["plan"] = plan

    table = processes.sample_paths(settings.seed, grid, plan, settings.samples, workers=settings.workers)
    table.to_csv(run.out / "samples.csv")

    # Empirical covariance against the series of the simulated truncation
    arrays = [processes.process_array(z, plan) for z in grid]
    centered = table.values - table.empirical_mean()
    rows = []
    for i in range(len(grid)):
        for j in range(i, len(grid)):
            empirical = table.empirical_covariance(i, j)
            series = complex(np.sum(arrays[i] * arrays[j]))
            spread = float(np.std(centered[:, i] * centered[:, j]))
            allowed = max(COVARIANCE_TOL, 5.0 * spread / math.sqrt(table.n_samples))
            gap = abs(empirical - series)
            run.require(f"covariance_{i}_{j}", gap <= allowed, gap)
            rows.append((i, j, *_complex_cells(empirical), *_complex_cells(series), gap))
    run.csv("covariance.csv", ("i", "j", "re_empirical", "im_empirical", "re_series", "im_series", "gap"), rows)

    run.results["samples"] = table.n_samples
    run.results["covariance"] = [
        {"i": row[0], "j": row[1], "empirical": complex(row[2], row[3]), "series": complex(row[4], row[5])}
        for row in rows
    ]
    real_points = [z.real for z in grid if z.imag == 0 and z.real >= 0]
    if len(real_points) >= 2:
        t, s = real_points[:2]
        run.results["exact_covariance"] = processes.covariance_sum(t, s, plan)


def run_parseval(run: Run) -> None:
    settings = run.settings
    n_list = sorted({n for n in (16, 64, 256, 1024) if n < settings.nmax} | {settings.nmax})
    report = diagnostics.parseval_scan(settings.T, n_list)
    run.results["parseval"] = report
    run.require("parseval_monotone", report.monotone)
    run.require("bessel", report.bessel_ok)
    if settings.nmax >= PARSEVAL_BAND_DEGREE:
        gap = report.rows[-1].gap
        run.require("parseval_band", abs(gap) <= PARSEVAL_BAND, gap)

    doubled = diagnostics.parseval_scan(2.0 * settings.T, n_list)
    run.results["doubled_difference"] = [
        {"N": a.N, "difference": b.partial_sum - a.partial_sum} for a, b in zip(report.rows, doubled.rows)
    ]
    run.csv(
        "parseval.csv",
        ("N", "partial_sum", "gap"),
        ((row.N, row.partial_sum, row.gap) for row in report.rows),
    )


COMMANDS: dict[str, tuple[Callable[[Run], None], str]] = {
    "bounds": (run_bounds, "Certify the Hermite envelopes, orthonormality and recurrences"),
    "spaces": (run_spaces, "Wick algebra laws, Vage inequality and duality bounds"),
    "process": (run_process, "Brownian, white noise and regularized process diagnostics"),
    "integrate": (run_integrate, "Contour Wick integral with refinement and orientation checks"),
    "ito": (run_ito, "Real and regularized Ito formula checks"),
    "mehler": (run_mehler, "Mehler series against the closed form on a real grid"),
    "diverge": (run_diverge, "Imaginary-time divergence certificate"),
    "simulate": (run_simulate, "Seeded Monte Carlo paths and empirical covariance"),
    "parseval": (run_parseval, "Parseval partial sums on [0, t]"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.cli", description="Complex-time Wick calculus workbench.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Defaults stay None so INI values and settings defaults show through
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI file with a [workbench] section")
    common.add_argument("--radius", type=float, default=None)
    common.add_argument("--p", type=int, default=None)
    common.add_argument("--nmax", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help=f"Artifact directory (default {DEFAULT_OUT_DIR})")
    common.add_argument("--eps", type=float, default=None)
    common.add_argument("--T", type=float, default=None)
    common.add_argument("--z", default=None)
    common.add_argument("--contour", default=None, help="segment:a,b | arc:c,r,theta0,theta1 | polyline:z0,z1,...")
    common.add_argument("--integrand", choices=("unit", "brownian", "regularized"), default=None)
    common.add_argument("--family", choices=[family.value for family in WeightFamily], default=None)
    common.add_argument("--k", type=int, default=None)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--grid", default=None, help="Comma separated complex points")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--verbose", action="store_true")

    for name, (_, help_text) in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config", "verbose")
    }
    try:
        settings = load_settings(args.config, overrides)
    except (ValidationError, FileNotFoundError) as exc:
        logger.error(f"Invalid configuration: {exc}")
        out = overrides["out"] or DEFAULT_OUT_DIR
        config = {key: value for key, value in overrides.items() if value is not None}
        failure = {"code": "invalid_config", "message": str(exc)}
        write_manifest(out, args.command, config, overrides["seed"], {}, [failure])
        return EXIT_ERROR

    if settings.nmax is None:
        settings = settings.model_copy(update={"nmax": DEFAULT_NMAX.get(args.command)})

    run = Run(args.command, settings)
    handler, _ = COMMANDS[args.command]
    status = EXIT_OK
    try:
        handler(run)
    except WorkbenchError as exc:
        logger.error(f"{args.command} aborted: {exc}")
        run.failures.append(exc.to_dict())
        status = EXIT_ERROR
    except ValueError as exc:
        logger.error(f"{args.command} aborted: {exc}")
        run.failures.append({"code": "invalid_argument", "message": str(exc)})
        status = EXIT_ERROR

    if status == EXIT_OK and run.failures:
        status = EXIT_FAILED
    write_manifest(run.out, args.command, settings, settings.seed, run.results, run.failures)
    logger.info(f"{args.command} finished with exit code {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
