"""Sparse chaos-coefficient algebra: multi-indices, graded norms, pairing and the Wick product."""

import json
import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.signal import convolve
from scipy.special import gammaln, logsumexp

from app.core.errors import WorkbenchError
from app.schemas.algebra import AlgebraLawReport, AlgebraReport, VageRow

logger = logging.getLogger(__name__)

# Product factors below this are 1 to double precision
_PRODUCT_CUTOFF = 1e-18
_MAX_PRODUCT_TERMS = 2048


class OrderTooHighError(WorkbenchError):
    """Raised when an order-1 operation receives a higher-order vector."""

    code = "order_too_high"

    def __init__(self, order: int, limit: int = 1):
        self.order = order
        self.limit = limit
        super().__init__(f"Chaos order {order} exceeds {limit}")


class DivergentWeightSumError(WorkbenchError):
    """Raised when sum over alpha of b_alpha^{-l} diverges."""

    code = "divergent_weight_sum"

    def __init__(self, l: float, reason: str):
        self.l = l
        super().__init__(f"Weight sum diverges for l={l}: {reason}")


@dataclass(frozen=True, order=True)
class MultiIndex:
    """
    A finitely supported exponent sequence alpha.

    Stored as sorted (coordinate, exponent) pairs with strictly increasing
    coordinates and exponents >= 1. The empty tuple is the zero multi-index.
    """

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        previous = -1
        for k, exponent in self.entries:
            if k <= previous:
                raise ValueError(f"Coordinates must be strictly increasing: {self.entries}")
            if k < 0 or exponent < 1:
                raise ValueError(f"Invalid entry ({k}, {exponent})")
            previous = k

    @classmethod
    def zero(cls) -> "MultiIndex":
        return cls(())

    @classmethod
    def unit(cls, k: int) -> "MultiIndex":
        """The unit index e_k."""
        return cls(((k, 1),))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "MultiIndex":
        return cls(tuple(sorted((int(k), int(e)) for k, e in mapping.items() if e != 0)))

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        merged = self.as_dict()
        for k, exponent in other.entries:
            merged[k] = merged.get(k, 0) + exponent
        return MultiIndex(tuple(sorted(merged.items())))

    @property
    def order(self) -> int:
        """|alpha|, the sum of exponents."""
        return sum(exponent for _, exponent in self.entries)

    def sort_key(self) -> tuple:
        return (self.order, self.entries)

    def __str__(self) -> str:
        if not self.entries:
            return "0"
        return "{" + ", ".join(f"{k}:{e}" for k, e in self.entries) + "}"


@dataclass(frozen=True)
class WeightSequence:
    """
    Superexponential weights a_k = base^(k + shift).

    The default a_k = 2^(k+1) satisfies a_k a_j = a_{k+j+1} and makes
    sum over alpha of b_alpha^{-d} finite for d = 1.
    """

    base: float = 2.0
    shift: int = 1
    d: int = 1

    def __post_init__(self):
        if self.base <= 1.0:
            raise ValueError("Weight base must exceed 1")
        if self.d < 1:
            raise ValueError("Convergence exponent d must be >= 1")

    def log_weight(self, k: int) -> float:
        return (k + self.shift) * math.log(self.base)


DEFAULT_WEIGHTS = WeightSequence()


def factorial_log(alpha: MultiIndex) -> float:
    """ln(alpha!) = sum over k of ln(alpha_k!)."""
    if not alpha.entries:
        return 0.0
    exponents = np.array([exponent for _, exponent in alpha.entries], dtype=float)
    return float(np.sum(gammaln(exponents + 1.0)))


def b_weight_log(alpha: MultiIndex, weights: WeightSequence = DEFAULT_WEIGHTS) -> float:
    """ln b_alpha = sum over k of alpha_k ln a_k."""
    return math.fsum(exponent * weights.log_weight(k) for k, exponent in alpha.entries)


@dataclass(frozen=True, eq=False)
class ChaosVector:
    """
    Immutable sparse map MultiIndex -> complex coefficient.

    Exact zeros are dropped at construction. Iteration is in sorted key
    order so every reduction over a vector is reproducible.
    """

    _coeffs: Mapping[MultiIndex, complex] = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {}
        for alpha, value in self._coeffs.items():
            if not isinstance(alpha, MultiIndex):
                raise TypeError(f"Keys must be MultiIndex, got {type(alpha).__name__}")
            value = complex(value)
            if value != 0:
                cleaned[alpha] = value
        ordered = dict(sorted(cleaned.items(), key=lambda item: item[0].sort_key()))
        object.__setattr__(self, "_coeffs", MappingProxyType(ordered))

    @classmethod
    def zero(cls) -> "ChaosVector":
        return cls({})

    @classmethod
    def unit_element(cls) -> "ChaosVector":
        """Indicator of the zero multi-index, the Wick identity."""
        return cls({MultiIndex.zero(): 1.0})

    @classmethod
    def indicator(cls, alpha: MultiIndex, value: complex = 1.0) -> "ChaosVector":
        return cls({alpha: value})

    @classmethod
    def from_order1(cls, coefficients: Iterable[complex]) -> "ChaosVector":
        """Order-1 vector with coefficients[n] at e_n."""
        return cls({MultiIndex.unit(n): c for n, c in enumerate(coefficients)})

    @property
    def coeffs(self) -> Mapping[MultiIndex, complex]:
        return self._coeffs

    @property
    def max_order(self) -> int:
        return max((alpha.order for alpha in self._coeffs), default=0)

    def support(self) -> list[MultiIndex]:
        return list(self._coeffs)

    def coefficient(self, alpha: MultiIndex) -> complex:
        return self._coeffs.get(alpha, 0j)

    def items(self) -> Iterator[tuple[MultiIndex, complex]]:
        return iter(self._coeffs.items())

    def __len__(self) -> int:
        return len(self._coeffs)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self._coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChaosVector):
            return NotImplemented
        return dict(self._coeffs) == dict(other._coeffs)

    def __hash__(self) -> int:
        return hash(tuple(self._coeffs.items()))

    def __add__(self, other: "ChaosVector") -> "ChaosVector":
        merged = dict(self._coeffs)
        for alpha, value in other.items():
            merged[alpha] = merged.get(alpha, 0j) + value
        return ChaosVector(merged)

    def __neg__(self) -> "ChaosVector":
        return ChaosVector({alpha: -value for alpha, value in self.items()})

    def __sub__(self, other: "ChaosVector") -> "ChaosVector":
        return self + (-other)

    def __mul__(self, scalar: complex) -> "ChaosVector":
        scalar = complex(scalar)
        return ChaosVector({alpha: scalar * value for alpha, value in self.items()})

    __rmul__ = __mul__

    def conjugate(self) -> "ChaosVector":
        return ChaosVector({alpha: value.conjugate() for alpha, value in self.items()})

    def order1_array(self, n_terms: int) -> np.ndarray:
        """
        Coefficients at e_0, ..., e_{n_terms-1} as an array.

        Raises:
            OrderTooHighError: If the vector carries terms of order > 1
        """
        if self.max_order > 1:
            raise OrderTooHighError(self.max_order)
        array = np.zeros(n_terms, dtype=complex)
        for alpha, value in self.items():
            if alpha.order == 1:
                k = alpha.entries[0][0]
                if k < n_terms:
                    array[k] = value
        return array

    def to_document(self) -> list[dict]:
        """JSON-ready list of {alpha: [[k, exp], ...], re, im}."""
        return [
            {"alpha": [list(entry) for entry in alpha.entries], "re": value.real, "im": value.imag}
            for alpha, value in self.items()
        ]

    @classmethod
    def from_document(cls, document: list[dict]) -> "ChaosVector":
        return cls(
            {
                MultiIndex(tuple((int(k), int(e)) for k, e in term["alpha"])): complex(
                    float(term["re"]), float(term["im"])
                )
                for term in document
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_document(), allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ChaosVector":
        return cls.from_document(json.loads(text))


def norm_minus(f: ChaosVector, p: float, weights: WeightSequence = DEFAULT_WEIGHTS) -> float:
    """||f||_{-p} = (sum |f_alpha|^2 b_alpha^{-p})^{1/2}."""
    return math.sqrt(
        math.fsum(
            abs(value) ** 2 * math.exp(-p * b_weight_log(alpha, weights))
            for alpha, value in f.items()
        )
    )


def norm_plus(f: ChaosVector, p: float, weights: WeightSequence = DEFAULT_WEIGHTS) -> float:
    """
    ||f||_{p} = (sum |f_alpha|^2 (alpha!)^2 b_alpha^{p})^{1/2}.

    Summed in log domain; factorials and weights overflow quickly.
    """
    if not len(f):
        return 0.0
    logs = [
        2.0 * math.log(abs(value)) + 2.0 * factorial_log(alpha) + p * b_weight_log(alpha, weights)
        for alpha, value in f.items()
    ]
    return math.exp(0.5 * float(logsumexp(logs)))


def pairing(f: ChaosVector, g: ChaosVector) -> complex:
    """<f, g> = sum over alpha of alpha! conj(g_alpha) f_alpha."""
    terms = [
        math.exp(factorial_log(alpha)) * g.coefficient(alpha).conjugate() * value
        for alpha, value in f.items()
        if alpha in g.coeffs
    ]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def wick(f: ChaosVector, g: ChaosVector) -> ChaosVector:
    """(f * g)_gamma = sum over alpha + beta = gamma of f_alpha g_beta."""
    product: dict[MultiIndex, complex] = {}
    for alpha, a in f.items():
        for beta, b in g.items():
            gamma = alpha + beta
            product[gamma] = product.get(gamma, 0j) + a * b
    return ChaosVector(product)


def vage_constant(l: float, weights: WeightSequence = DEFAULT_WEIGHTS) -> float:
    """
    A(l) = (sum over alpha of b_alpha^{-l})^{1/2} = (prod_k (1 - a_k^{-l})^{-1})^{1/2}.

    Raises:
        DivergentWeightSumError: If l < d or some a_k^{-l} >= 1
    """
    if l < weights.d:
        raise DivergentWeightSumError(l, f"l must be >= d={weights.d}")

    log_sum = 0.0
    for k in range(_MAX_PRODUCT_TERMS):
        ratio = math.exp(-l * weights.log_weight(k))
        if ratio >= 1.0:
            raise DivergentWeightSumError(l, f"a_{k}^(-l) = {ratio:g} is not below 1")
        log_sum -= math.log1p(-ratio)
        if ratio < _PRODUCT_CUTOFF:
            break
    return math.exp(0.5 * log_sum)


def pointwise_product_order1(f: ChaosVector, g: ChaosVector) -> ChaosVector:
    """
    Ordinary product of two order <= 1 vectors.

    Z_n Z_m = Z_n * Z_m + delta_{nm}, so the product is the Wick product
    plus (sum over k of f_{e_k} g_{e_k}) times the unit element. No
    conjugation enters.

    Raises:
        OrderTooHighError: If either vector has order > 1 terms
    """
    for vector in (f, g):
        if vector.max_order > 1:
            raise OrderTooHighError(vector.max_order)

    shared = [
        value * g.coefficient(alpha)
        for alpha, value in f.items()
        if alpha.order == 1 and alpha in g.coeffs
    ]
    trace = complex(math.fsum(t.real for t in shared), math.fsum(t.imag for t in shared))
    return wick(f, g) + ChaosVector.unit_element() * trace


# Property suite: small basis for the exhaustive law checks
_BASIS_COORDINATES = 4
_BASIS_ORDER = 2
_UNITS = (1.0 + 0j, -1.0 + 0j, 1j, -1j)
VAGE_ORDERS = ((3, 1), (4, 2), (5, 2))
_RATIO_SLACK = 1e-12


def small_basis(coordinates: int = _BASIS_COORDINATES, max_order: int = _BASIS_ORDER) -> list[MultiIndex]:
    """Every multi-index with |alpha| <= max_order on coordinates 0..coordinates-1."""
    grids = np.indices((max_order + 1,) * coordinates).reshape(coordinates, -1).T
    basis = [
        MultiIndex.from_mapping(dict(enumerate(row.tolist())))
        for row in grids
        if row.sum() <= max_order
    ]
    return sorted(basis, key=MultiIndex.sort_key)


def _to_dense(f: ChaosVector, coordinates: int, size: int) -> np.ndarray:
    dense = np.zeros((size,) * coordinates, dtype=complex)
    for alpha, value in f.items():
        position = [0] * coordinates
        for k, exponent in alpha.entries:
            position[k] = exponent
        dense[tuple(position)] = value
    return dense


def _from_dense(dense: np.ndarray) -> ChaosVector:
    return ChaosVector(
        {
            MultiIndex.from_mapping(dict(enumerate(position))): dense[position]
            for position in zip(*np.nonzero(dense))
        }
    )


def _random_sparse(rng: np.random.Generator, coordinates: int = 6, max_order: int = 3) -> ChaosVector:
    size = int(rng.integers(1, 9))
    coeffs = {}
    for _ in range(size):
        exponents = np.zeros(coordinates, dtype=int)
        for _ in range(int(rng.integers(0, max_order + 1))):
            exponents[rng.integers(0, coordinates)] += 1
        alpha = MultiIndex.from_mapping(dict(enumerate(exponents.tolist())))
        coeffs[alpha] = complex(rng.standard_normal(), rng.standard_normal())
    return ChaosVector(coeffs)


def wick_law_check(seed: int = 7, oracle_vectors: int = 200) -> AlgebraLawReport:
    """
    Commutativity, associativity, unit and bilinearity of the Wick product.

    Pairs range over the small basis with coefficients in {1, -1, i, -i};
    triples over the basis itself. Random vectors with coefficients in
    {0, 1, -1, i, -i} are compared against a dense N-d convolution. All
    of these sums are exact in floating point, so equality is exact.
    """
    basis = small_basis()
    unit = ChaosVector.unit_element()

    commutativity = unit_failures = 0
    pairs = 0
    for alpha in basis:
        for beta in basis:
            for c in _UNITS:
                for d in _UNITS:
                    f = ChaosVector.indicator(alpha, c)
                    g = ChaosVector.indicator(beta, d)
                    commutativity += wick(f, g) != wick(g, f)
                    pairs += 1
        f = ChaosVector.indicator(alpha)
        unit_failures += (wick(f, unit) != f) + (wick(unit, f) != f)

    associativity = bilinearity = 0
    triples = 0
    for i, alpha in enumerate(basis):
        f = ChaosVector.indicator(alpha)
        for j, beta in enumerate(basis):
            g = ChaosVector.indicator(beta)
            for k, gamma in enumerate(basis):
                h = ChaosVector.indicator(gamma)
                associativity += wick(wick(f, g), h) != wick(f, wick(g, h))
                a = _UNITS[(i + k) % 4]
                b = _UNITS[(j + k) % 4]
                bilinearity += wick(f * a + g * b, h) != wick(f, h) * a + wick(g, h) * b
                triples += 1

    rng = np.random.Generator(np.random.PCG64(seed))
    choices = np.array((0j,) + _UNITS)
    size = _BASIS_ORDER + 1
    mismatches = 0
    for _ in range(oracle_vectors):
        f, g = (
            ChaosVector({alpha: choices[rng.integers(0, len(choices))] for alpha in basis})
            for _ in range(2)
        )
        dense = convolve(
            _to_dense(f, _BASIS_COORDINATES, size),
            _to_dense(g, _BASIS_COORDINATES, size),
            method="direct",
        )
        mismatches += wick(f, g) != _from_dense(dense)

    report = AlgebraLawReport(
        basis_size=len(basis),
        pairs_checked=pairs,
        triples_checked=triples,
        commutativity_failures=int(commutativity),
        associativity_failures=int(associativity),
        unit_failures=int(unit_failures),
        bilinearity_failures=int(bilinearity),
        oracle_vectors=oracle_vectors,
        oracle_mismatches=int(mismatches),
    )
    logger.info(f"Wick laws on {len(basis)} basis indices: {mismatches} oracle mismatches")
    return report


def algebra_property_suite(seed: int = 7, n_pairs: int = 1000) -> AlgebraReport:
    """Run the Wick laws, the Vage inequality, the duality bound and grading on seeded random data."""
    laws = wick_law_check(seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    samples = [(_random_sparse(rng), _random_sparse(rng)) for _ in range(n_pairs)]

    vage = []
    for p, q in VAGE_ORDERS:
        constant = vage_constant(p - q)
        worst = 0.0
        for f, g in samples:
            bound = constant * norm_minus(f, p) * norm_minus(g, q)
            worst = max(worst, norm_minus(wick(f, g), p) / bound)
        vage.append(
            VageRow(p=p, q=q, constant=constant, pairs=n_pairs, worst_ratio=worst, ok=worst <= 1.0 + _RATIO_SLACK)
        )

    duality_worst = 0.0
    grading_ok = weights_ok = True
    zero = MultiIndex.zero()
    for f, g in samples:
        # g on the support of f so the pairing is not trivially zero
        shared = ChaosVector({alpha: complex(rng.standard_normal(), rng.standard_normal()) for alpha in f})
        for p in range(1, 7):
            duality_worst = max(duality_worst, abs(pairing(f, shared)) / (norm_plus(f, p) * norm_minus(shared, p)))

        off_zero = ChaosVector({alpha: value for alpha, value in f.items() if alpha != zero})
        if len(off_zero):
            norms = [norm_minus(off_zero, p) for p in range(1, 7)]
            grading_ok &= all(b < a for a, b in zip(norms, norms[1:]))

        for alpha in f:
            for beta in g:
                weights_ok &= b_weight_log(alpha) + b_weight_log(beta) <= b_weight_log(alpha + beta) + _RATIO_SLACK

    report = AlgebraReport(
        seed=seed,
        laws=laws,
        vage=vage,
        duality_worst_ratio=duality_worst,
        duality_ok=duality_worst <= 1.0 + _RATIO_SLACK,
        grading_ok=grading_ok,
        weights_ok=weights_ok,
    )
    logger.info(f"Algebra suite seed={seed}: ok={report.ok}")
    return report
