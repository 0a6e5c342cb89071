import numpy as np
import pytest
from fastapi.testclient import TestClient

from emberlab.dataset import SweepSpec, generate_dataset
from emberlab.emulator import EmulatorModel
from emberlab.service import create_app

SPEC = SweepSpec(rows=8, cols=8, steps=4,
                 patterns=("strip_south", "outward"),
                 speeds=(1.0, 4.0), directions=(230.0, 310.0), seed=2)


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    out = tmp_path_factory.mktemp("servedata")
    manifest = generate_dataset(SPEC, out)
    model = EmulatorModel(in_channels=4, hidden_channels=2, seed=0)
    return TestClient(create_app(manifest, out, model))


BODY = {"wind_speed": 4.0, "wind_direction": 270.0, "pattern": "strip_south"}


class TestPatterns:
    def test_lists_kinds_and_dims(self, client):
        got = client.get("/patterns").json()
        assert "strip_south" in got["patterns"]
        assert (got["rows"], got["cols"], got["steps"]) == (8, 8, 4)


class TestRuns:
    def test_manifest_listing(self, client):
        got = client.get("/runs").json()
        assert len(got["runs"]) == 8 + 2  # sweep + source runs
        assert len(got["train"]) == len(got["test"]) == 4


class TestPredict:
    def test_shape_contract(self, client):
        resp = client.post("/predict", json=BODY)
        assert resp.status_code == 200
        got = resp.json()
        assert len(got["frames"]) == 4
        assert len(got["frames"][0]) == 8 and len(got["frames"][0][0]) == 8
        assert len(got["ba_percent"]) == len(got["ros"]) == 4
        assert got["inference_ms"] >= 0.0
        assert got["scenario"]["pattern"] == "strip_south"
        assert got["scenario"]["wind_speed"] == 4.0

    def test_unknown_pattern_404(self, client):
        resp = client.post("/predict", json={**BODY, "pattern": "ring2"})
        assert resp.status_code == 404
        assert resp.json() == {"error": "unknown_pattern"}

    def test_out_of_range_wind_422_names_field(self, client):
        resp = client.post("/predict", json={**BODY, "wind_direction": 400.0})
        assert resp.status_code == 422
        assert "wind_direction" in str(resp.json()["detail"])
        resp = client.post("/predict", json={**BODY, "wind_speed": -1.0})
        assert resp.status_code == 422
        assert "wind_speed" in str(resp.json()["detail"])


class TestSimulate:
    def test_deterministic_per_seed(self, client):
        body = {**BODY, "seed": 7}
        a = client.post("/simulate", json=body).json()
        b = client.post("/simulate", json=body).json()
        assert a["frames"] == b["frames"]

    def test_fuel_monotone(self, client):
        got = client.post("/simulate", json=BODY).json()
        frames = np.asarray(got["frames"])
        assert np.all(np.diff(frames, axis=0) <= 1e-12)

    def test_unknown_pattern_404(self, client):
        resp = client.post("/simulate", json={**BODY, "pattern": "nope"})
        assert resp.status_code == 404
