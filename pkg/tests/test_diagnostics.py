import math

import pytest

from app.services.diagnostics import (
    divergence_lower_bound,
    divergence_scan,
    mehler_consistency,
    parseval_scan,
)
from app.services.hermite_complex import EpsOutOfRangeError, RegimeError

EPS_GRID = [0.1, 0.3, 0.5, 0.7, 0.9, 0.95]


def test_parseval_partial_sums_rise_below_t():
    report = parseval_scan(1.0, [256, 16, 64, 64])
    assert [row.N for row in report.rows] == [16, 64, 256]
    assert report.monotone
    assert report.bessel_ok
    gaps = [row.gap for row in report.rows]
    assert all(gap > 0 for gap in gaps)
    assert gaps[0] > gaps[1] > gaps[2]


def test_parseval_difference_tracks_interval_length():
    one = parseval_scan(1.0, [256]).rows[-1].partial_sum
    two = parseval_scan(2.0, [256]).rows[-1].partial_sum
    assert abs((two - one) - 1.0) <= 0.15


@pytest.mark.parametrize("t, n_list", [(0.0, [16]), (-1.0, [16]), (1.0, []), (1.0, [-1])])
def test_parseval_rejects_bad_input(t, n_list):
    with pytest.raises(ValueError):
        parseval_scan(t, n_list)


@pytest.mark.slow
def test_parseval_band_at_large_degree():
    report = parseval_scan(1.0, [4096])
    assert report.rows[0].gap <= 0.05


def test_lower_bound_is_exact_without_damping():
    report = divergence_scan(1.0, [0.0], 8)
    row = report.rows[0]
    assert row.partial_sum == pytest.approx(row.lower_bound, rel=1e-10)
    assert row.lower_bound == pytest.approx(divergence_lower_bound(1.0, 0.0))


def test_lower_bound_grows_with_eps():
    values = [divergence_lower_bound(1.0, eps) for eps in EPS_GRID]
    assert all(a < b for a, b in zip(values, values[1:]))
    with pytest.raises(EpsOutOfRangeError):
        divergence_lower_bound(1.0, 1.0)


def test_divergence_scan_certifies_growth():
    report = divergence_scan(1.0, EPS_GRID, 400)
    assert report.monotone
    assert report.certified
    assert report.growth_ratio >= 10.0
    for row in report.rows:
        assert row.partial_sum <= row.exact * (1.0 + 1e-9)


def test_divergence_scan_without_ratio_points():
    report = divergence_scan(1.0, [0.1, 0.2], 32)
    assert report.growth_ratio is None
    with pytest.raises(ValueError):
        divergence_scan(1.0, [1.0], 32)


def _real_pairs():
    grid = [-1.0, 0.0, 1.0]
    return [(complex(a), complex(b)) for a in grid for b in grid]


def test_mehler_series_matches_closed_form():
    report = mehler_consistency(0.5, _real_pairs(), 200)
    assert report.points == 9
    assert report.max_deviation <= 1e-8
    assert report.max_asymmetry <= 1e-12
    assert report.identity_gap <= 1e-8
    assert report.literal_prefactor_deviation > report.max_deviation


def test_mehler_without_damping_is_single_term():
    report = mehler_consistency(0.0, _real_pairs(), 4)
    assert report.max_deviation <= 1e-14


def test_mehler_complex_points_inside_regime():
    pairs = [(0.2j, 0.3 + 0.1j), (0.5 + 0.2j, -0.4j)]
    report = mehler_consistency(0.3, pairs, 120)
    assert report.max_deviation <= 1e-8
    assert math.isfinite(report.identity_gap)


def test_mehler_regime_is_enforced():
    with pytest.raises(RegimeError):
        mehler_consistency(0.5, [(0.5j, 0.5j)], 64)
