import math

import numpy as np
import pytest
from scipy.special import erf

from app.schemas.integration import RefinementScheme
from app.services.chaos_algebra import ChaosVector, norm_minus
from app.services.contour_integration import (
    NOISE_CACHE_ENTRIES,
    Arc,
    Contour,
    ContourParseError,
    IntegrandField,
    NoConvergenceError,
    Segment,
    antisymmetry_matrix,
    integrate_wick,
    ito_check_real,
    ito_check_regularized,
    ito_correction,
    _cached_noise_matrix,
    _noise_matrix,
    parse_contour,
)
from app.services.hermite_complex import OutsideDiskError, RegimeError
from app.services.processes import brownian_coeffs, regularized_coeffs

UNIT = IntegrandField.constant(ChaosVector.unit_element())


def test_parse_contour_pieces():
    contour = parse_contour("segment:0,0.5j; arc:0,0.5,1.5707963267948966,3.141592653589793")
    assert isinstance(contour.pieces[0], Segment)
    assert isinstance(contour.pieces[1], Arc)
    assert contour.start == 0
    assert abs(contour.end - (-0.5)) < 1e-15

    polyline = parse_contour("polyline:0,1,1+1j")
    assert len(polyline.pieces) == 2
    assert polyline.end == 1 + 1j


@pytest.mark.parametrize(
    "text",
    ["circle:0,1", "segment:0", "segment:0,1;segment:2,3", "arc:0,1j,0,1", "segment 0,1", "segment:0,x"],
)
def test_parse_contour_errors(text):
    with pytest.raises(ContourParseError):
        parse_contour(text)


def test_reverse_and_split():
    contour = Contour.polyline([0.0, 0.5, 0.5 + 0.5j])
    reverse = contour.reversed()
    assert reverse.start == contour.end
    assert reverse.end == contour.start

    first, second = contour.split()
    assert first.end == second.start
    assert first.concat(second).label == contour.label

    arc = Contour.arc(0.0, 0.5, 0.0, math.pi)
    left, right = arc.split()
    assert abs(left.end - 0.5j) < 1e-15
    assert right.end == arc.end

    with pytest.raises(ValueError):
        Contour.segment(0.0, 1.0).concat(Contour.segment(2.0, 3.0))


def test_unit_integrand_gives_brownian_increment(unit_plan):
    z = 0.5j
    result = integrate_wick(UNIT, Contour.segment(0.0, z), unit_plan)
    assert len(result.levels) >= 3
    assert norm_minus(result.value - brownian_coeffs(z, unit_plan), unit_plan.p) <= 2.0 * unit_plan.tol


def test_closed_loop_integrates_to_zero(unit_plan):
    loop = Contour.arc(0.0, 0.5, 0.0, 2.0 * math.pi)
    result = integrate_wick(UNIT, loop, unit_plan)
    assert norm_minus(result.value, unit_plan.p) <= 2.0 * unit_plan.tol


def test_brownian_integrand_robustness(short_plan):
    contour = Contour.polyline([0.0, 0.4, 0.4 + 0.4j])
    field = IntegrandField.brownian()
    tol = short_plan.tol

    dyadic = integrate_wick(field, contour, short_plan, track_stability=True)
    triadic = integrate_wick(field, contour, short_plan, scheme=RefinementScheme.TRIADIC)
    reverse = integrate_wick(field, contour.reversed(), short_plan)
    first, second = contour.split()
    parts = [integrate_wick(field, piece, short_plan) for piece in (first, second)]

    assert dyadic.value.max_order == 2
    assert norm_minus(dyadic.value - triadic.value, short_plan.p) <= 2.0 * tol
    assert norm_minus(dyadic.value + reverse.value, short_plan.p) <= 2.0 * tol
    assert norm_minus(dyadic.value - parts[0].value - parts[1].value, short_plan.p) <= 2.0 * tol
    assert dyadic.stable

    report = dyadic.report()
    assert report.contour_id == contour.label
    assert report.levels[0].cauchy_residual is None
    assert report.terms == len(dyadic.value)


def test_combination_is_linear(short_plan):
    contour = Contour.segment(0.0, 0.3 + 0.3j)
    combined = IntegrandField.combination((2.0, UNIT), (-1j, IntegrandField.brownian()))
    whole = integrate_wick(combined, contour, short_plan).value
    unit_part = integrate_wick(UNIT, contour, short_plan).value
    brownian_part = integrate_wick(IntegrandField.brownian(), contour, short_plan).value
    expected = unit_part * 2.0 + brownian_part * (-1j)
    assert norm_minus(whole - expected, short_plan.p) <= 4.0 * short_plan.tol


def test_field_value_at_a_single_point(short_plan):
    z = 0.3 + 0.2j
    field = IntegrandField.combination(
        (2.0, UNIT), (-1j, IntegrandField.brownian()), (0.5, IntegrandField.regularized(0.4))
    )
    value = field.evaluate(z, short_plan)
    expected = (
        ChaosVector.unit_element() * 2.0
        + brownian_coeffs(z, short_plan) * (-1j)
        + regularized_coeffs(z, 0.4, short_plan) * 0.5
    )
    assert norm_minus(value - expected, short_plan.p) <= 1e-12

    keys, matrix = field.matrix(np.array([z]), short_plan)
    row = [value.coefficient(alpha) for alpha in keys]
    np.testing.assert_allclose(row, matrix[0], rtol=1e-12, atol=1e-14)


def test_large_noise_matrices_are_not_cached():
    piece = Contour.segment(0.0, 0.5).pieces[0]
    _cached_noise_matrix.cache_clear()
    small = _noise_matrix(piece, 8, 16, None)
    assert _noise_matrix(piece, 8, 16, None) is small
    assert _cached_noise_matrix.cache_info().currsize == 1

    panels = NOISE_CACHE_ENTRIES // 17 + 1
    large = _noise_matrix(piece, panels, 16, None)
    assert large.shape == (panels, 17)
    assert not large.flags.writeable
    assert _noise_matrix(piece, panels, 16, None) is not large
    assert _cached_noise_matrix.cache_info().currsize == 1


def test_contour_outside_disk(unit_plan):
    with pytest.raises(OutsideDiskError):
        integrate_wick(UNIT, Contour.segment(0.0, 1.5j), unit_plan)


def test_refinement_cap(unit_plan):
    with pytest.raises(NoConvergenceError) as excinfo:
        integrate_wick(IntegrandField.brownian(), Contour.segment(0.0, 1.0), unit_plan, tol=1e-14, max_level=2)
    assert excinfo.value.level == 2


def test_antisymmetry(short_plan):
    matrix = antisymmetry_matrix(1.0, short_plan)
    assert matrix.shape == (65, 65)
    assert np.max(np.abs(matrix + matrix.T)) <= 1e-9


def test_real_ito_formula(short_plan):
    report = ito_check_real(1.0, short_plan)
    assert report.ok
    assert report.antisymmetry_max <= 1e-9
    assert report.residual_norm <= report.tol + report.parseval_gap

    assert ito_check_real(0.01, short_plan).ok


def test_ito_correction_agrees_with_closed_form(short_plan):
    correction = ito_correction(0.5j, 0.3, short_plan)
    assert correction.gap <= 1e-6
    closed = correction.closed_form.value
    assert correction.literal_variant.value == pytest.approx(closed / math.sqrt(2.0))


def test_ito_correction_regime(short_plan):
    with pytest.raises(RegimeError):
        ito_correction(0.5j, 0.9, short_plan)


def test_regularized_ito_formula(short_plan):
    report = ito_check_regularized(0.5j, 0.3, short_plan)
    assert report.ok
    assert report.residual_norm <= 2.0 * report.tol


def test_regularized_ito_without_damping(short_plan):
    # Only degree 0 survives: the correction is the squared first coefficient of B_1
    c0 = math.pi**-0.25 * math.sqrt(math.pi / 2.0) * float(erf(1.0 / math.sqrt(2.0)))
    report = ito_check_regularized(1.0, 0.0, short_plan)
    assert report.ok
    assert report.correction.series.value == pytest.approx(c0 * c0, abs=1e-9)
    assert report.correction.gap <= 1e-9


def test_regularized_correction_tends_to_real_time(long_plan):
    series = [ito_correction(1.0, eps, long_plan) for eps in (0.5, 0.9, 0.99)]
    for correction in series:
        assert correction.gap <= 1e-6
        assert correction.series.value.imag == 0
    values = [correction.series.value.real for correction in series]
    assert values[0] < values[1] < values[2] < 1.0
    assert values[2] > 0.9
