import math

import numpy as np
import pytest
from scipy.special import erf, erfi

from app.schemas.process import ProcessKind, ProcessSpec, WeightFamily
from app.services.chaos_algebra import ChaosVector, MultiIndex, pairing
from app.services.hermite_complex import OutsideDiskError, zeta_table
from app.services.processes import (
    InfeasiblePlanError,
    analyticity_check,
    brownian_array,
    brownian_coeffs,
    continuity_check,
    covariance_operator,
    covariance_sum,
    derivative_array,
    membership_check,
    path_array,
    plan,
    process_array,
    regularized_coeffs,
    sample_paths,
    segment_array,
    tail_bound,
    weighted_coeffs,
    white_noise_coeffs,
)

WHITE_NOISE = ProcessSpec(kind=ProcessKind.WHITE_NOISE)

# B_1 first coefficient: pi^{-1/4} sqrt(pi/2) erf(1/sqrt(2))
B_AT_ONE = math.pi**-0.25 * math.sqrt(math.pi / 2.0) * float(erf(1.0 / math.sqrt(2.0)))


def test_plan_for_unit_disk(unit_plan):
    assert unit_plan.p == 6
    assert unit_plan.N == 186
    assert unit_plan.q == pytest.approx(math.exp(4.0) / 64.0)
    assert unit_plan.tail_ok
    assert unit_plan.tail_bound <= 1e-12
    # N is the smallest admissible truncation
    assert tail_bound(unit_plan, unit_plan.N - 1) > 1e-12


def test_plan_small_radius_uses_p_one():
    assert plan(0.01, 1e-6).p == 1


def test_plan_rejects_infeasible_order():
    with pytest.raises(InfeasiblePlanError):
        plan(1.0, 1e-6, p=5)


def test_fixed_truncation_reports_tail(short_plan):
    assert short_plan.N == 64
    assert short_plan.p == 6
    assert not short_plan.tail_ok


def test_brownian_coefficients_at_real_time(unit_plan):
    values = brownian_array(1.0, unit_plan)
    assert values.shape == (187,)
    assert values[0] == pytest.approx(B_AT_ONE, abs=1e-8)
    assert np.max(np.abs(values.imag)) < 1e-12


def test_white_noise_is_the_hermite_table(unit_plan):
    z = 0.3 - 0.4j
    np.testing.assert_array_equal(process_array(z, unit_plan, WHITE_NOISE), zeta_table(unit_plan.N, z))
    assert white_noise_coeffs(z, unit_plan).max_order == 1


def test_regularized_scales_by_sqrt_eps(short_plan):
    z = 0.5j
    plain = brownian_coeffs(z, short_plan).order1_array(65)
    scaled = regularized_coeffs(z, 0.25, short_plan).order1_array(65)
    np.testing.assert_allclose(scaled, plain * 0.5 ** np.arange(65), rtol=1e-14, atol=0)


def test_outside_disk(unit_plan):
    with pytest.raises(OutsideDiskError):
        process_array(1.5, unit_plan)


def test_segment_increments_match_differences(unit_plan):
    a, b = 0.2 + 0.1j, -0.3 + 0.5j
    increment = segment_array(a, b, unit_plan)
    difference = brownian_array(b, unit_plan) - brownian_array(a, unit_plan)
    np.testing.assert_allclose(increment, difference, atol=1e-10)


def test_path_array_matches_direct_evaluation(short_plan):
    points = np.array([0.1, 0.3 + 0.2j, 0.5j, -0.4 + 0.1j])
    rows = path_array(points, short_plan, tol=1e-13)
    direct = np.stack([segment_array(0.0, z, short_plan, tol=1e-13) for z in points])
    np.testing.assert_allclose(rows, direct, atol=1e-11)


def test_analyticity_residuals_decay_linearly(unit_plan):
    report = analyticity_check(0.2 + 0.1j, [1e-2, 1e-3, 1e-4], unit_plan)
    assert report.observed_order >= 0.9
    assert report.directions_agree
    assert report.bound_ok
    assert set(report.residuals) == {"+h", "-h", "+ih", "-ih"}


def test_weighted_analyticity_targets_weighted_noise(unit_plan):
    spec = ProcessSpec(kind=ProcessKind.WEIGHTED, family=WeightFamily.POLYNOMIAL, k=1)
    z0 = -0.1 + 0.25j
    np.testing.assert_allclose(
        derivative_array(z0, unit_plan, spec),
        zeta_table(unit_plan.N, z0) * (1.0 + z0 * z0),
    )
    report = analyticity_check(z0, [1e-2, 1e-3, 1e-4], unit_plan, spec)
    assert report.bound_constant is None
    assert report.observed_order >= 0.9
    assert report.directions_agree


def test_continuity_and_membership(unit_plan):
    assert continuity_check(0.3j, 0.5, unit_plan).ok
    rng = np.random.Generator(np.random.PCG64(17))
    points = np.sqrt(rng.uniform(size=100)) * np.exp(2j * np.pi * rng.uniform(size=100))
    report = membership_check(points, unit_plan)
    assert report.points == 100
    assert report.norm_ok
    assert report.coefficient_ok
    assert report.worst_coefficient_ratio <= 1.0


def test_covariance_operator_is_rank_one(unit_plan):
    f = ChaosVector.from_order1([1.0, -0.5j, 0.25])
    z, w = 0.4, 0.2 + 0.3j
    image = covariance_operator(z, w, f, unit_plan)
    scalar = pairing(f, brownian_coeffs(w, unit_plan))
    assert image == brownian_coeffs(z, unit_plan) * scalar


def test_covariance_sums(long_plan):
    report = covariance_sum(0.5, 1.0, long_plan)
    assert report.exact == pytest.approx(0.5)
    assert abs(report.gap) <= 0.02

    spec = ProcessSpec(kind=ProcessKind.WEIGHTED, family=WeightFamily.POLYNOMIAL, k=1)
    weighted = covariance_sum(0.5, 1.0, long_plan, spec)
    assert weighted.exact == pytest.approx(0.589583, abs=1e-6)
    assert abs(weighted.gap) <= 0.02


def test_sampling_is_deterministic(short_plan):
    grid = [0.5, 1.0, 0.5j]
    first = sample_paths(7, grid, short_plan, 2500)
    second = sample_paths(7, grid, short_plan, 2500, workers=3)
    other = sample_paths(8, grid, short_plan, 2500)
    assert first.values.shape == (2500, 3)
    np.testing.assert_array_equal(first.values, second.values)
    assert not np.array_equal(first.values, other.values)


def test_sample_table_csv(tmp_path, short_plan):
    table = sample_paths(3, [0.5, 1.0], short_plan, 4)
    path = table.to_csv(tmp_path / "samples.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "re_z,im_z,sample_id,re_B,im_B"
    assert len(lines) == 1 + 8
    assert lines[1].startswith("0.5,0.0,0,")


@pytest.mark.slow
def test_monte_carlo_covariance(long_plan):
    table = sample_paths(7, [0.5, 1.0], long_plan, 100_000, workers=4)
    assert abs(table.empirical_covariance(0, 1) - 0.5) <= 0.02
    assert abs(table.empirical_covariance(0, 0) - 0.5) <= 0.02


def test_unit_weight_gives_brownian_motion(unit_plan):
    z = 0.35 - 0.45j
    expected = brownian_coeffs(z, unit_plan)
    assert weighted_coeffs(z, ProcessSpec(kind=ProcessKind.WEIGHTED), unit_plan) == expected
    assert weighted_coeffs(z, ProcessSpec(), unit_plan) == expected
    with pytest.raises(ValueError):
        weighted_coeffs(z, WHITE_NOISE, unit_plan)


@pytest.mark.parametrize(
    "family, exact",
    [
        (WeightFamily.EXP_PLUS, 0.5 * math.sqrt(math.pi) * float(erfi(0.5))),
        (WeightFamily.EXP_MINUS, 0.5 * math.sqrt(math.pi) * float(erf(0.5))),
    ],
)
def test_exponential_weights(long_plan, unit_plan, family, exact):
    spec = ProcessSpec(kind=ProcessKind.WEIGHTED, family=family, k=1)
    report = covariance_sum(0.5, 1.0, long_plan, spec)
    assert report.exact == pytest.approx(exact, rel=1e-10)
    assert abs(report.gap) <= 0.02

    z0 = 0.2 - 0.3j
    sign = 1.0 if family == WeightFamily.EXP_PLUS else -1.0
    np.testing.assert_allclose(
        derivative_array(z0, unit_plan, spec),
        zeta_table(unit_plan.N, z0) * np.exp(0.5 * sign * z0 * z0),
    )
    # zeta_0 sqrt(m) is pi^{-1/4} for exp_plus and pi^{-1/4} e^{-u^2} for exp_minus
    first = weighted_coeffs(z0, spec, unit_plan).coefficient(MultiIndex.unit(0))
    if family == WeightFamily.EXP_PLUS:
        expected = math.pi**-0.25 * z0
    else:
        expected = math.pi**-0.25 * 0.5 * math.sqrt(math.pi) * complex(erf(z0))
    assert abs(first - expected) <= 1e-8


def test_regularization_without_damping_keeps_degree_zero(unit_plan):
    z = 0.4 + 0.3j
    regularized = regularized_coeffs(z, 0.0, unit_plan)
    assert regularized.support() == [MultiIndex.unit(0)]
    assert regularized.coefficient(MultiIndex.unit(0)) == brownian_coeffs(z, unit_plan).coefficient(MultiIndex.unit(0))


def test_white_noise_at_origin(short_plan):
    noise = white_noise_coeffs(0.0, short_plan)
    assert noise.coefficient(MultiIndex.unit(0)) == pytest.approx(math.pi**-0.25)
    assert noise.coefficient(MultiIndex.unit(2)) == pytest.approx(-(math.pi**-0.25) / math.sqrt(2.0))
    assert all(noise.coefficient(MultiIndex.unit(n)) == 0 for n in range(1, 65, 2))
    assert len(noise) == 33
