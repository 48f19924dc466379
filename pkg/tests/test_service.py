"""HTTP service tests: endpoint contracts, error payloads, determinism.

Runs the FastAPI app in-process through the test client; each module
gets a fresh app instance (and hence a fresh model store).
"""

import xml.etree.ElementTree as ET

import numpy as np
import pytest
from fastapi.testclient import TestClient

import mkdepth
from mkdepth.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def banana_sample(client):
    resp = client.post(
        "/sample", json={"family": "banana", "n": 120, "seed": 1}
    )
    assert resp.status_code == 200
    return resp.json()["measure"]


@pytest.fixture(scope="module")
def fitted(client, banana_sample):
    resp = client.post(
        "/fit",
        json={
            "data": banana_sample,
            "reference": {"kind": "ball-grid", "rings": 10, "spokes": 12},
        },
    )
    assert resp.status_code == 200
    return resp.json()


def _error(resp):
    detail = resp.json()["detail"]
    assert set(detail) == {"code", "message", "stage"}
    assert detail["message"]
    return detail


# ---------------------------------------------------------------------------
# health and sampling


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"] == mkdepth.__version__


def test_sample_is_deterministic(client, banana_sample):
    again = client.post("/sample", json={"family": "banana", "n": 120, "seed": 1})
    assert again.json()["measure"] == banana_sample
    other = client.post("/sample", json={"family": "banana", "n": 120, "seed": 2})
    assert other.json()["measure"] != banana_sample
    assert banana_sample["dim"] == 2
    assert len(banana_sample["points"]) == 120


def test_sample_unknown_family(client):
    resp = client.post("/sample", json={"family": "torus", "n": 10})
    assert resp.status_code == 400
    detail = _error(resp)
    assert detail["stage"] == "sample"
    assert detail["code"] == "parse-error"


# ---------------------------------------------------------------------------
# fitting


def test_fit_returns_model_and_metadata(fitted):
    assert len(fitted["model_id"]) == 16
    meta = fitted["metadata"]
    assert meta["solver"] == "assignment"
    assert np.isfinite(meta["objective"])
    assert meta["support_size"] == 120
    model = fitted["model"]
    assert model["mode"] == "assignment"
    assert len(model["images"]) == 120
    assert model["metadata"]["reference"]["kind"] == "ball-grid"


def test_fit_identical_payload_hits_same_id(client, banana_sample, fitted):
    resp = client.post(
        "/fit",
        json={
            "data": banana_sample,
            "reference": {"kind": "ball-grid", "rings": 10, "spokes": 12},
        },
    )
    assert resp.json()["model_id"] == fitted["model_id"]


def test_fit_size_mismatch(client, banana_sample):
    short = dict(banana_sample, points=banana_sample["points"][:10])
    resp = client.post(
        "/fit",
        json={
            "data": short,
            "reference": {"kind": "ball-grid", "rings": 10, "spokes": 12},
        },
    )
    assert resp.status_code == 400
    detail = _error(resp)
    assert detail["stage"] == "fit"
    assert detail["code"] == "inconsistent-arity"


def test_fit_reference_spec_validation(client, banana_sample):
    resp = client.post(
        "/fit",
        json={"data": banana_sample, "reference": {"kind": "ball-grid"}},
    )
    assert resp.status_code == 400
    assert _error(resp)["code"] == "parse-error"
    resp = client.post(
        "/fit",
        json={"data": banana_sample, "reference": {"kind": "lattice", "count": 120}},
    )
    assert resp.status_code == 422  # rejected by schema validation


def test_fit_semidiscrete_solver(client):
    sample = client.post(
        "/sample", json={"family": "uniform-ball", "n": 10, "seed": 4}
    ).json()["measure"]
    resp = client.post(
        "/fit",
        json={
            "data": sample,
            "reference": {"kind": "ball-grid", "rings": 10, "spokes": 15},
            "solver": "semidiscrete",
        },
    )
    assert resp.status_code == 200
    meta = resp.json()["metadata"]
    assert meta["solver"] == "semidiscrete"
    assert meta["mass_residual"] <= 1e-3
    assert meta["iterations"] >= 1


def test_fit_store_false_keeps_model_out_of_store(client):
    sample = client.post(
        "/sample", json={"family": "banana", "n": 120, "seed": 9}
    ).json()["measure"]
    resp = client.post(
        "/fit",
        json={
            "data": sample,
            "reference": {"kind": "ball-grid", "rings": 10, "spokes": 12},
            "store": False,
        },
    )
    body = resp.json()
    assert client.get(f"/models/{body['model_id']}").status_code == 404
    inline = client.post(
        "/depth", json={"model": body["model"], "queries": [[0.0, 0.0]]}
    )
    assert inline.status_code == 200


# ---------------------------------------------------------------------------
# model store


def test_models_listing_and_fetch(client, fitted):
    listing = client.get("/models").json()
    mid = fitted["model_id"]
    assert any(m["model_id"] == mid for m in listing)
    entry = next(m for m in listing if m["model_id"] == mid)
    assert entry["mode"] == "assignment"
    assert entry["dim"] == 2
    assert entry["data_size"] == entry["reference_size"] == 120
    assert client.get(f"/models/{mid}").json() == fitted["model"]


def test_unknown_model_is_404(client):
    resp = client.get("/models/deadbeefdeadbeef")
    assert resp.status_code == 404
    resp = client.post(
        "/depth", json={"model_id": "deadbeefdeadbeef", "queries": [[0.0, 0.0]]}
    )
    assert resp.status_code == 404
    detail = _error(resp)
    assert detail["code"] == "unknown-model"
    assert detail["stage"] == "depth"


# ---------------------------------------------------------------------------
# depth queries


def test_depth_reports(client, fitted):
    resp = client.post(
        "/depth",
        json={"model_id": fitted["model_id"], "queries": [[0.0, 0.5], [50.0, 50.0]]},
    )
    assert resp.status_code == 200
    near, far = resp.json()["reports"]
    for report in (near, far):
        assert len(report["vector_rank"]) == 2
        assert len(report["sign"]) == 2
        assert 0.0 <= report["scalar_rank"] <= 1.0
        assert 0.0 <= report["depth"] <= 0.5
    assert not near["extrapolated"]
    assert far["extrapolated"]
    assert far["scalar_rank"] == 1.0


def test_depth_needs_model_or_id(client):
    resp = client.post("/depth", json={"queries": [[0.0, 0.0]]})
    assert resp.status_code == 400
    assert _error(resp)["code"] == "unfitted"


def test_depth_rejects_malformed_inline_model(client):
    resp = client.post(
        "/depth", json={"model": {"mode": "assignment"}, "queries": [[0.0, 0.0]]}
    )
    assert resp.status_code == 400
    assert _error(resp)["code"] == "parse-error"


def test_depth_dimension_mismatch(client, fitted):
    resp = client.post(
        "/depth", json={"model_id": fitted["model_id"], "queries": [[0.0, 0.0, 0.0]]}
    )
    assert resp.status_code == 400
    assert _error(resp)["code"] == "dimension-mismatch"


# ---------------------------------------------------------------------------
# contours, regions, figures


def test_contour_endpoint(client, fitted, banana_sample):
    resp = client.post(
        "/contour", json={"model_id": fitted["model_id"], "taus": [0.3, 0.8]}
    )
    assert resp.status_code == 200
    contours = resp.json()["contours"]
    assert [c["tau"] for c in contours] == [0.3, 0.8]
    sample_set = {tuple(p) for p in banana_sample["points"]}
    for c in contours:
        assert all(tuple(p) in sample_set for p in c["points"])


def test_contour_invalid_tau(client, fitted):
    resp = client.post(
        "/contour", json={"model_id": fitted["model_id"], "taus": [1.5]}
    )
    assert resp.status_code == 400
    detail = _error(resp)
    assert detail["code"] == "invalid-tau"
    assert detail["stage"] == "contour"


def test_region_endpoint(client, fitted, banana_sample):
    resp = client.post("/region", json={"model_id": fitted["model_id"], "tau": 0.5})
    assert resp.status_code == 200
    body = resp.json()
    assert body["tau"] == 0.5
    sample_set = {tuple(p) for p in banana_sample["points"]}
    assert 0 < len(body["points"]) <= 120
    assert all(tuple(p) in sample_set for p in body["points"])


def test_figure_endpoint(client, fitted):
    resp = client.post(
        "/figure",
        json={"model_id": fitted["model_id"], "taus": [0.3, 0.6], "alpha": 0.0},
    )
    assert resp.status_code == 200
    svg = resp.json()["svg"]
    root = ET.fromstring(svg)
    polys = root.findall(".//{http://www.w3.org/2000/svg}polyline")
    assert len(polys) == 2
    assert f"version {mkdepth.__version__}" in svg


def test_figure_rejects_univariate_model(client):
    sample = client.post(
        "/sample", json={"family": "univariate-uniform", "n": 24, "dim": 1, "seed": 0}
    ).json()["measure"]
    fit = client.post(
        "/fit",
        json={
            "data": sample,
            "reference": {"kind": "ball-mc", "count": 24, "dim": 1, "seed": 7},
        },
    ).json()
    resp = client.post("/figure", json={"model_id": fit["model_id"]})
    assert resp.status_code == 400
    assert _error(resp)["code"] == "unsupported-dimension"


# ---------------------------------------------------------------------------
# convergence


def test_converge_endpoint(client):
    resp = client.post(
        "/converge",
        json={
            "family": "uniform-ball",
            "sizes": [200],
            "seeds": [0],
            "band": [0.25, 0.75],
            "probe_count": 80,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["band"] == [0.25, 0.75]
    assert body["probe_count"] == 80
    (row,) = body["rows"]
    assert row["family"] == "uniform-ball"
    assert row["n"] == 200 and row["seed"] == 0 and row["tau"] == 0.5
    assert row["sup_error"] > 0 and row["hausdorff"] > 0


def test_converge_requires_oracle(client):
    resp = client.post(
        "/converge",
        json={
            "family": "banana",
            "sizes": [50],
            "seeds": [0],
            "band": [0.25, 0.75],
        },
    )
    assert resp.status_code == 400
    detail = _error(resp)
    assert detail["code"] == "no-oracle"
    assert detail["stage"] == "converge"
