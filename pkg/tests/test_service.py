import math

import pytest
from fastapi.testclient import TestClient

from berknash import UnhappyParams, make_divergence_instance, make_unhappy_principal
from berknash.service import app

client = TestClient(app)


@pytest.fixture(scope="module")
def unhappy_payload():
    inst = make_unhappy_principal(UnhappyParams(0.86, 0.6, 0.01))
    return inst.to_dict()


def test_root():
    resp = client.get("/")
    assert resp.status_code == 200
    assert resp.json()["service"] == "berknash"


def test_validate(unhappy_payload):
    resp = client.post("/validate", json={"instance": unhappy_payload})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n_actions"] == 2 and body["n_rewards"] == 3 and body["n_beliefs"] == 1
    assert body["misspecification_level"] <= 0.02


def test_validate_rejects_bad_instance(unhappy_payload):
    bad = dict(unhappy_payload)
    bad["true_dists"] = [[0.5, 0.4, 0.0], [0.86, 0.14, 0.0]]
    resp = client.post("/validate", json={"instance": bad})
    assert resp.status_code == 422
    assert "sum deviation" in resp.json()["detail"]


def test_kl(unhappy_payload):
    resp = client.post("/kl", json={"instance": unhappy_payload})
    assert resp.status_code == 200
    prof = resp.json()["profiles"][0]
    assert prof["kl_by_action"][0] == pytest.approx(0.0)
    assert prof["kl_by_action"][1] == pytest.approx(0.86 * math.log(0.86 / 0.85))


def test_breakpoints(unhappy_payload):
    resp = client.post("/breakpoints", json={"instance": unhappy_payload})
    assert resp.status_code == 200
    body = resp.json()
    assert body["break_points"][0] == 0.0 and body["break_points"][-1] == 1.0


def test_equilibria(unhappy_payload):
    resp = client.post(
        "/equilibria",
        json={
            "instance": unhappy_payload,
            "contract": [0.0, 0.0, 0.0],
            "grid_n": 200,
            "epsilon": 1e-9,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["count"] >= 1
    assert body["certificates"][0]["alpha"] == [0.0, 1.0]


def test_solve(unhappy_payload):
    resp = client.post("/solve", json={"instance": unhappy_payload})
    assert resp.status_code == 200
    rep = resp.json()["report"]
    expected = max(1 - 0.86, 0.86 + 0.02 - 0.6 * 0.86 / 0.72)
    assert rep["revenue"] == pytest.approx(expected, abs=1e-9)
    assert rep["certificate"]["valid"] is True


def test_simulate_divergence():
    inst, contract = make_divergence_instance()
    resp = client.post(
        "/simulate",
        json={
            "instance": inst.to_dict(),
            "contract": contract.to_list(),
            "horizon": 5000,
            "seed": 1,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["horizon"] == 5000
    assert body["rng_algorithm"] == "philox4x64"
    assert len(body["switch_times"]) >= 3
    assert body["cycle_stats"] is not None


def test_scenario_unhappy_endpoint():
    resp = client.post(
        "/scenario/unhappy", json={"p": 0.86, "c": 0.6, "delta": 0.0001}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["bounds"]["gap_ratio"] >= 1.81
    assert len(body["instance"]["beliefs"]) == 1


def test_scenario_unhappy_rejects_bad_params():
    resp = client.post("/scenario/unhappy", json={"p": 0.5, "c": 0.6, "delta": 0.0001})
    assert resp.status_code == 422


def test_scenario_divergence_endpoint():
    resp = client.post("/scenario/divergence")
    assert resp.status_code == 200
    body = resp.json()
    assert body["contract"] == [1.0, 1.0, 1.0, 0.0]


def test_reduce_endpoint():
    resp = client.post(
        "/reduce", json={"y": [[2.0]], "z": [[1.0]], "eps_prime": 0.1}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["verification"]["passed"] is True
    assert body["reduction"]["k"] == 4
    assert body["reduction"]["e_tilde"] == pytest.approx(2.75)
