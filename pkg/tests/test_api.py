import pytest
from fastapi.testclient import TestClient

from defectline.main import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy"}
    assert "X-Process-Time" in response.headers


def test_root(client):
    body = client.get("/").json()
    assert body["status"] == "running"


def test_multiplet(client):
    body = client.get("/api/v1/algebra/multiplets/2").json()
    assert body["count"] == 10 == len(body["rows"])
    assert body["rows"][0]["members"] == ["v*", "v*"]


def test_multiplet_limits(client):
    assert client.get("/api/v1/algebra/multiplets/13").status_code == 400
    response = client.get("/api/v1/algebra/multiplets/0")
    assert response.status_code == 422
    assert response.json()["type"] == "invalid-argument"


def test_check_reaction(client):
    body = client.post("/api/v1/algebra/check", json={"reaction": "v' -> v*"}).json()
    assert body["incoming"] == ["v*"]
    assert body["legal"] is True
    body = client.post("/api/v1/algebra/check", json={"reaction": "v + v -> e"}).json()
    assert body["before"] == [2, 2] and body["after"] == [0, 1]
    assert body["legal"] is False


def test_check_reaction_parse_error(client):
    response = client.post("/api/v1/algebra/check", json={"reaction": "v -> q"})
    assert response.status_code == 422
    assert response.json()["type"] == "reaction-parse"


def test_snapshot_bubble(client):
    payload = {
        "wavefield": {"builtin": "bubble", "T": 1.0},
        "t": 0.0,
        "window": {"x_min": -2, "x_max": 2, "y_min": -2, "y_max": 2},
    }
    body = client.post("/api/v1/fields/snapshot", json=payload).json()
    species = sorted(d["species"] for d in body["defects"] if d["species"].endswith("Vortex"))
    assert species == ["AntiVortex", "Vortex"]
    assert body["suspects"] == 0


def test_snapshot_matrix(client):
    payload = {
        "wavefield": {"matrix": {"n": 2, "re": [0, 0, 0, 2], "im": [0, 0, 0, 0]}, "xi": 2},
        "window": {"x_min": -1, "x_max": 3, "y_min": -2, "y_max": 2},
    }
    body = client.post("/api/v1/fields/snapshot", json=payload).json()
    vortices = sorted(d["x"] for d in body["defects"] if d["species"] == "Vortex")
    assert vortices == pytest.approx([0.0, 2.0], abs=1e-8)


def test_snapshot_size_limit(client):
    assert client.post("/api/v1/fields/snapshot", json={"wavefield": {"n": 17}}).status_code == 400
