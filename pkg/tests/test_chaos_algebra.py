import math

import numpy as np
import pytest

from app.services.chaos_algebra import (
    ChaosVector,
    DivergentWeightSumError,
    MultiIndex,
    OrderTooHighError,
    WeightSequence,
    algebra_property_suite,
    b_weight_log,
    factorial_log,
    norm_minus,
    norm_plus,
    pairing,
    pointwise_product_order1,
    small_basis,
    vage_constant,
    wick,
    wick_law_check,
)

ZERO = MultiIndex.zero()
E0 = MultiIndex.unit(0)
E1 = MultiIndex.unit(1)
E2 = MultiIndex.unit(2)


def index(**exponents):
    return MultiIndex.from_mapping({int(k[1:]): e for k, e in exponents.items()})


def test_multi_index_validation():
    with pytest.raises(ValueError):
        MultiIndex(((2, 1), (1, 1)))
    with pytest.raises(ValueError):
        MultiIndex(((0, 0),))
    assert MultiIndex.from_mapping({3: 1, 0: 2}).entries == ((0, 2), (3, 1))
    assert (E0 + E1 + E0).as_dict() == {0: 2, 1: 1}
    assert str(index(k0=3, k2=2)) == "{0:3, 2:2}"


def test_factorial_log():
    assert factorial_log(ZERO) == 0.0
    assert factorial_log(index(k0=2)) == pytest.approx(math.log(2.0))
    assert factorial_log(index(k0=3, k2=2)) == pytest.approx(math.log(12.0))


def test_weights():
    assert b_weight_log(ZERO) == 0.0
    assert b_weight_log(E0) == pytest.approx(math.log(2.0))
    assert b_weight_log(index(k1=2, k3=1)) == pytest.approx(2 * math.log(4.0) + math.log(16.0))
    with pytest.raises(ValueError):
        WeightSequence(base=1.0)


def test_norms_of_indicators():
    one = ChaosVector.unit_element()
    assert norm_minus(one, 3) == pytest.approx(1.0)
    assert norm_plus(one, 3) == pytest.approx(1.0)
    for p in (1, 2, 5):
        assert norm_minus(ChaosVector.indicator(E0), p) == pytest.approx(2.0 ** (-p / 2))
    # (alpha!)^2 b^p with alpha = 2 e_0
    assert norm_plus(ChaosVector.indicator(index(k0=2)), 1) == pytest.approx(math.sqrt(4.0 * 4.0))


def test_norm_minus_decreases_with_p():
    f = ChaosVector({E0: 1.0, index(k1=1, k2=1): 2.0 - 1j, index(k4=3): 0.5j})
    norms = [norm_minus(f, p) for p in range(1, 7)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_pairing_examples():
    assert pairing(ChaosVector.unit_element(), ChaosVector.unit_element()) == 1
    assert pairing(ChaosVector.indicator(E0), ChaosVector.indicator(E1)) == 0
    f = ChaosVector.indicator(index(k0=2))
    assert pairing(f, f) == pytest.approx(2.0)
    # the second argument is conjugated
    assert pairing(ChaosVector.indicator(E0, 1j), ChaosVector.indicator(E0, 1j)) == pytest.approx(1.0)


def test_wick_examples():
    assert wick(ChaosVector.indicator(E1), ChaosVector.indicator(E2)) == ChaosVector.indicator(index(k1=1, k2=1))
    assert wick(ChaosVector.indicator(E0), ChaosVector.indicator(E0)) == ChaosVector.indicator(index(k0=2))
    f = ChaosVector({E0: 1.5, index(k3=2): -2j})
    assert wick(f, ChaosVector.unit_element()) == f


def test_zero_coefficients_are_dropped():
    f = ChaosVector({E0: 1.0, E1: 0.0})
    assert len(f) == 1
    assert len(f - f) == 0
    assert f.max_order == 1


def test_vage_constant():
    oracle = math.sqrt(1.0 / math.prod(1.0 - 2.0 ** (-2 * (k + 1)) for k in range(50)))
    assert vage_constant(2) == pytest.approx(oracle, rel=1e-12)
    assert vage_constant(2) == pytest.approx(1.2051, abs=1e-4)
    assert vage_constant(60) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DivergentWeightSumError):
        vage_constant(0.5)


def test_vage_inequality_on_a_pair():
    f = ChaosVector({ZERO: 0.3, E0: 1.0, index(k1=2): -0.7j})
    g = ChaosVector({E0: 2.0, E2: 1.0 + 1.0j})
    p, q = 4, 2
    lhs = norm_minus(wick(f, g), p)
    assert lhs <= vage_constant(p - q) * norm_minus(f, p) * norm_minus(g, q)


def test_pointwise_product_order1():
    z0 = ChaosVector.indicator(E0)
    expected = ChaosVector({index(k0=2): 1.0, ZERO: 1.0})
    assert pointwise_product_order1(z0, z0) == expected

    z1 = ChaosVector.indicator(E1)
    assert pointwise_product_order1(z0, z1) == ChaosVector.indicator(index(k0=1, k1=1))

    g = ChaosVector({E0: 2.0, E1: -1j, ZERO: 0.5})
    c = ChaosVector.unit_element() * 3.0
    assert pointwise_product_order1(c, g) == g * 3.0

    with pytest.raises(OrderTooHighError):
        pointwise_product_order1(ChaosVector.indicator(index(k0=2)), z0)


def test_order1_array():
    f = ChaosVector.from_order1([1.0, 0.0, 2.0 - 1j])
    np.testing.assert_array_equal(f.order1_array(4), [1.0, 0.0, 2.0 - 1j, 0.0])
    with pytest.raises(OrderTooHighError):
        ChaosVector.indicator(index(k0=2)).order1_array(3)


def test_json_document_is_exact():
    f = ChaosVector({ZERO: 0.1, E0: 1 / 3 - 2j / 7, index(k2=1, k5=4): -1e-300 + 3.5e12j})
    assert ChaosVector.from_json(f.to_json()) == f
    assert f.to_document()[0] == {"alpha": [], "re": 0.1, "im": 0.0}


def test_small_basis_size():
    basis = small_basis()
    assert len(basis) == 15
    assert basis[0] == ZERO
    assert max(alpha.order for alpha in basis) == 2


def test_wick_laws_exact():
    report = wick_law_check(seed=11, oracle_vectors=50)
    assert report.pairs_checked == 15 * 15 * 16
    assert report.triples_checked == 15**3
    assert report.commutativity_failures == 0
    assert report.associativity_failures == 0
    assert report.unit_failures == 0
    assert report.bilinearity_failures == 0
    assert report.oracle_mismatches == 0


def test_property_suite():
    report = algebra_property_suite(seed=3, n_pairs=200)
    assert [(row.p, row.q) for row in report.vage] == [(3, 1), (4, 2), (5, 2)]
    assert all(row.worst_ratio <= 1.0 for row in report.vage)
    assert report.duality_ok
    assert report.grading_ok
    assert report.weights_ok
    assert report.ok
