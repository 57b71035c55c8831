import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    from fastapi.testclient import TestClient

from ddgmps.service import app


@pytest.fixture(scope="module")
def client():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        with TestClient(app) as c:
            yield c


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert "version" in body


def test_experiment_endpoint_heat(client):
    r = client.post("/experiments", json={
        "problem": "linear_diffusion",
        "resolutions": [8],
        "final_time": 5e-5,
        "snapshot_times": [2.5e-5],
    })
    assert r.status_code == 200
    body = r.json()
    assert body["problem"] == "linear_diffusion"
    assert len(body["rows"]) == 1
    row = body["rows"][0]
    assert row["n_cells"] == 128
    assert row["l2_error"] > 0
    assert row["min_violation"] >= -1e-12
    assert row["max_violation"] <= 1e-12
    assert "2.5e-05" in row["snapshots"]
    assert "h," in body["csv"] or "h" in body["csv"].splitlines()[0]


def test_experiment_unknown_problem_422(client):
    r = client.post("/experiments", json={
        "problem": "no_such_problem",
        "resolutions": [8],
        "final_time": 1e-4,
    })
    assert r.status_code == 422


def test_experiment_validation_422(client):
    r = client.post("/experiments", json={
        "problem": "linear_diffusion",
        "resolutions": [],
        "final_time": 1e-4,
    })
    assert r.status_code == 422


def test_quadcheck_endpoint(client):
    r = client.post("/quadcheck", json={"n_triangles": 100,
                                        "n_weight_configs": 10, "seed": 1})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"] is True
    assert body["mapped_rule_max_error"] < 1e-13
    assert body["selected_weights_min"] > 0


def test_meshgen_endpoint(client, tmp_path):
    out = tmp_path / "mesh.txt"
    r = client.post("/meshgen", json={"nx": 6, "ny": 6, "pattern": "obtuse",
                                      "periodic": True, "path": str(out)})
    assert r.status_code == 200
    body = r.json()
    assert body["n_cells"] == 72
    assert body["theta_max_deg"] == pytest.approx(108.0, abs=0.1)
    assert out.exists()


def test_meshgen_perturbed_seeded(client):
    r1 = client.post("/meshgen", json={"nx": 5, "ny": 5,
                                       "pattern": "perturbed", "seed": 9})
    r2 = client.post("/meshgen", json={"nx": 5, "ny": 5,
                                       "pattern": "perturbed", "seed": 9})
    assert r1.status_code == r2.status_code == 200
    assert r1.json() == r2.json()


def test_meshgen_bad_pattern_422(client):
    r = client.post("/meshgen", json={"nx": 4, "ny": 4, "pattern": "spiral"})
    assert r.status_code == 422
