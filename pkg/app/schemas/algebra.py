"""Pydantic models for the chaos-algebra property suite."""

from pydantic import BaseModel, Field


class AlgebraLawReport(BaseModel):
    """Wick product laws on the small basis |alpha| <= 2, coordinates <= 3."""

    basis_size: int
    pairs_checked: int
    triples_checked: int
    commutativity_failures: int
    associativity_failures: int
    unit_failures: int
    bilinearity_failures: int
    oracle_vectors: int = Field(..., description="Random vector pairs compared with dense convolution")
    oracle_mismatches: int


class VageRow(BaseModel):
    p: int
    q: int
    constant: float = Field(..., description="A(p - q)")
    pairs: int
    worst_ratio: float = Field(..., description="max ||f*g||_{-p} / (A ||f||_{-p} ||g||_{-q})")
    ok: bool


class AlgebraReport(BaseModel):
    seed: int
    laws: AlgebraLawReport
    vage: list[VageRow]
    duality_worst_ratio: float = Field(..., description="max |<f,g>| / (||f||_p ||g||_{-p}) over p <= 6")
    duality_ok: bool
    grading_ok: bool = Field(..., description="||f||_{-p} strictly decreasing in p off the zero index")
    weights_ok: bool = Field(..., description="b_alpha b_beta <= b_{alpha+beta}")

    @property
    def ok(self) -> bool:
        laws = self.laws
        return (
            laws.commutativity_failures == 0
            and laws.associativity_failures == 0
            and laws.unit_failures == 0
            and laws.bilinearity_failures == 0
            and laws.oracle_mismatches == 0
            and all(row.ok for row in self.vage)
            and self.duality_ok
            and self.grading_ok
            and self.weights_ok
        )
