import math

import pytest
from fastapi.testclient import TestClient

from app.main import app

client = TestClient(app)

HERMITE = "/api/v1/hermite"
PROCESSES = "/api/v1/processes"
DIAGNOSTICS = "/api/v1/diagnostics"

B_AT_ONE = math.pi**-0.25 * math.sqrt(math.pi / 2.0) * math.erf(1.0 / math.sqrt(2.0))


def test_root_and_health():
    assert client.get("/").json() == {"status": "Workbench Running"}
    body = client.get("/health").json()
    assert body["status"] == "healthy"
    assert set(body["libraries"]) == {"app", "numpy", "scipy", "pydantic"}


def test_zeta_values():
    response = client.post(f"{HERMITE}/zeta", json={"n": 0, "z": {"re": 0.0}})
    assert response.status_code == 200
    body = response.json()
    assert body["value"]["re"] == pytest.approx(0.7511255, abs=1e-7)
    assert body["envelope"]["c_z"] == pytest.approx(1.4204, abs=1e-4)

    prime = client.post(f"{HERMITE}/zeta", json={"n": 1, "z": {"re": 0.0}, "derivative": True}).json()
    assert prime["value"]["re"] == pytest.approx(1.0622519, abs=1e-7)


@pytest.mark.parametrize("convention", ["alternating", "paper_signed"])
def test_zeta_signed_convention(convention):
    zeta1 = math.sqrt(2.0) * math.pi**-0.25 * math.exp(-0.5)
    response = client.post(f"{HERMITE}/zeta", json={"n": 1, "z": {"re": 1.0}, "convention": convention})
    assert response.status_code == 200
    assert response.json()["value"]["re"] == pytest.approx(-zeta1, abs=1e-12)


def test_zeta_rejects_unknown_convention():
    response = client.post(f"{HERMITE}/zeta", json={"n": 1, "z": {"re": 1.0}, "convention": "signed"})
    assert response.status_code == 422


def test_zeta_rejects_points_outside_disk():
    response = client.post(f"{HERMITE}/zeta", json={"n": 3, "z": {"re": 4.0}})
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "outside_disk"


def test_zeta_rejects_degree_above_cap():
    response = client.post(f"{HERMITE}/zeta", json={"n": 5001, "z": {"re": 0.0}})
    assert response.status_code == 422


def test_bounds_hold():
    body = client.post(f"{HERMITE}/bounds", json={"n": 10, "z": {"re": 1.0, "im": 1.0}}).json()
    assert body["zeta_ok"]
    assert body["zeta_prime_ok"]
    assert body["zeta_margin"] >= 0


def test_mehler_kernel():
    body = client.post(f"{HERMITE}/mehler", json={"eps": 0.5, "u": {"re": 0.0}, "v": {"re": 0.0}}).json()
    assert body["kernel"]["re"] == pytest.approx(0.6514, abs=1e-4)
    assert body["deviation"] <= 1e-8


def test_mehler_regime_error():
    response = client.post(
        f"{HERMITE}/mehler",
        json={"eps": 0.5, "u": {"re": 0.0, "im": 0.5}, "v": {"re": 0.0, "im": 0.5}},
    )
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "regime_error"


def test_plan_endpoint():
    body = client.post(f"{PROCESSES}/plan", json={"radius": 1.0, "tol": 1e-6}).json()
    assert body["p"] == 6
    assert body["N"] == 186


def test_plan_infeasible():
    response = client.post(f"{PROCESSES}/plan", json={"radius": 1.0, "p": 5})
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "infeasible_plan"


def test_coefficients_endpoint():
    body = client.post(
        f"{PROCESSES}/coefficients",
        json={"radius": 1.0, "n_terms": 16, "z": {"re": 1.0}},
    ).json()
    assert len(body["coefficients"]) == 17
    assert body["coefficients"][0]["re"] == pytest.approx(B_AT_ONE, abs=1e-7)
    assert body["norm_minus"] > 0


def test_parseval_endpoint():
    body = client.post(f"{DIAGNOSTICS}/parseval", json={"t": 1.0, "n_list": [16, 64]}).json()
    assert body["monotone"]
    assert body["bessel_ok"]


def test_divergence_endpoint():
    body = client.post(f"{DIAGNOSTICS}/divergence", json={"T": 1.0, "eps_grid": [0.1, 0.5], "N": 64}).json()
    assert body["monotone"]
    assert body["growth_ratio"] is None
