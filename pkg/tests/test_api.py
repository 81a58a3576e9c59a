import math

import pytest
from fastapi.testclient import TestClient

from pfkernel import __version__
from pfkernel.main import app

client = TestClient(app)

SHORT = {"points": [[0.0, 0.1]], "homology_dimension": 1}
LONG = {"points": [[0.0, 2.0]], "homology_dimension": 1}


def test_status():
    response = client.get("/api/status")
    assert response.status_code == 200
    assert response.json() == {"status": "success", "message": f"pfkernel {__version__} is running"}


def test_persistence_of_unit_square():
    response = client.post("/api/persistence", json={"points": [[0, 0], [1, 0], [1, 1], [0, 1]]})
    body = response.json()
    assert body["status"] == "success"
    h0, h1 = body["diagrams"]
    assert sorted(h0["points"], key=lambda p: (p[1] is None, p)) == [[0.0, 0.5]] * 3 + [[0.0, None]]
    assert h1["homology_dimension"] == 1
    assert h1["points"][0][0] == 0.5
    assert h1["points"][0][1] == pytest.approx(math.sqrt(2) / 2)


def test_dist():
    same = client.post("/api/dist", json={"diagram_i": SHORT, "diagram_j": SHORT, "sigma": 0.1}).json()
    assert same == {"status": "success", "value": 0.0, "support_size": 2, "accel_used": False}

    body = client.post("/api/dist", json={"diagram_i": SHORT, "diagram_j": LONG, "sigma": 0.1}).json()
    assert 0.0 < body["value"] <= math.pi / 2
    assert body["support_size"] == 4


def test_dist_essential_policies():
    essential = {"points": [[0.0, None]], "homology_dimension": 0}
    dropped = client.post("/api/dist", json={"diagram_i": essential, "diagram_j": {"points": []},
                                             "sigma": 0.1}).json()
    assert dropped["value"] == 0.0 and dropped["support_size"] == 0

    capped = client.post("/api/dist", json={"diagram_i": essential, "diagram_j": {"points": []},
                                            "sigma": 0.1, "essential": "cap:1"}).json()
    assert capped["status"] == "success" and capped["value"] > 0


def test_dist_errors():
    inverted = {"points": [[1.0, 0.5]]}
    body = client.post("/api/dist", json={"diagram_i": inverted, "diagram_j": SHORT, "sigma": 0.1}).json()
    assert body["status"] == "error"
    assert body["error"] == "diagram_invalid"

    response = client.post("/api/dist", json={"diagram_i": SHORT, "diagram_j": SHORT, "sigma": 0.0})
    assert response.status_code == 422


def test_gram():
    body = client.post("/api/gram", json={
        "diagrams": [SHORT, LONG],
        "params": {"kernel": "pf", "t": 1.0, "sigma": 0.1},
    }).json()
    assert body["status"] == "success" and body["kernel"] == "pf"
    values = body["values"]
    assert values[0][0] == values[1][1] == 1.0
    assert values[0][1] == values[1][0]
    assert 0.0 < values[0][1] < 1.0

    body = client.post("/api/gram", json={"diagrams": [SHORT, LONG], "params": {"kernel": "sw", "M": 4, "sigma": 1.0}}).json()
    assert body["kernel"] == "sw" and len(body["values"]) == 2

    response = client.post("/api/gram", json={"diagrams": [SHORT], "params": {"kernel": "heat", "sigma": 1.0}})
    assert response.status_code == 422


def test_kfdr():
    body = client.post("/api/kfdr", json={
        "diagrams": [SHORT] * 3 + [LONG] * 3,
        "params": {"t": 1.0, "sigma": 0.1},
    }).json()
    assert body["status"] == "success"
    assert [tau for tau, _ in body["scores"]] == [2, 3, 4]
    assert body["change_point"] == 3

    response = client.post("/api/kfdr", json={"diagrams": [SHORT] * 3, "params": {"t": 1.0, "sigma": 0.1}})
    assert response.status_code == 422


def test_error_bodies_follow_the_error_schema():
    body = client.post("/api/persistence", json={"points": [[0.0, 0.0]], "max_dim": 1, "max_scale": 1.0}).json()
    assert body["status"] == "success" and set(body) == {"status", "diagrams"}

    inverted = {"points": [[1.0, 0.5]]}
    body = client.post("/api/gram", json={"diagrams": [inverted], "params": {"kernel": "pf", "t": 1.0, "sigma": 0.1}}).json()
    assert set(body) == {"status", "message", "error"}
    assert body["status"] == "error" and body["error"] == "diagram_invalid"


def test_openapi_documents_success_and_error_models():
    schema = client.get("/openapi.json").json()
    names = set(schema["components"]["schemas"])
    assert {"ErrorResponse", "PersistenceResponse", "DistanceResponse", "GramResponse", "KfdrResponse"} <= names
    kfdr = schema["paths"]["/api/kfdr"]["post"]["responses"]["200"]["content"]["application/json"]["schema"]
    refs = {option["$ref"].rsplit("/", 1)[-1] for option in kfdr["anyOf"]}
    assert refs == {"KfdrResponse", "ErrorResponse"}
