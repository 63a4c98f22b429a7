import pytest

from app import MAX_SIMULATE_LENGTH, app as flask_app


@pytest.fixture
def client():
    flask_app.config["TESTING"] = True
    with flask_app.test_client() as client:
        yield client


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.get_json() == {"status": "ok"}
    assert "POST /api/calculus" in client.get("/").get_json()["endpoints"]


def test_calculus_endpoint(client):
    response = client.post("/api/calculus", json={
        "pmf": {"offset": 0, "probs": [0.5, 0.25, 0.125, 0.125]},
    })
    data = response.get_json()
    assert response.status_code == 200
    assert data["passed"] is True
    assert data["report"]["theta"] == pytest.approx(0.5)


def test_calculus_endpoint_theta_zero(client):
    response = client.post("/api/calculus", json={
        "pmf": {"offset": 0, "probs": [], "infinity_mass": 1.0},
    })
    data = response.get_json()
    assert response.status_code == 200
    assert data["report"]["theta"] == 0.0
    assert "warning" in data


def test_calculus_endpoint_rejects_bad_pmf(client):
    response = client.post("/api/calculus", json={"pmf": {"offset": 0, "probs": [0.5, 0.6]}})
    assert response.status_code == 400
    assert response.get_json()["error"] == "NotNormalized"

    response = client.post("/api/calculus", json={"probs": [1.0]})
    assert response.status_code == 400


def test_missing_body(client):
    response = client.post("/api/calculus")
    assert response.status_code == 400
    assert response.get_json()["error"] == "ClusterLabError"


def test_verify_endpoint(client):
    law = {"u": 1, "v": 1, "entries": {"011": 1.0}, "source": "exact"}
    data = client.post("/api/verify", json={"law": law, "max_set_size": 2}).get_json()
    assert data["passed"] is False
    assert data["failed"] >= 1
    assert data["total"] == len(data["checks"])


def test_window_law_endpoint(client):
    spec = {"model": "markov_binary", "params": {"p01": 0.1, "p11": 0.6}}
    response = client.post("/api/window-law", json={"spec": spec, "u": 1, "v": 1})
    law = response.get_json()["law"]
    assert response.status_code == 200
    assert sum(law["entries"].values()) == pytest.approx(1.0)
    assert all(pattern[1] == "1" for pattern in law["entries"])


def test_window_law_endpoint_rejects_moving_maxima(client):
    spec = {"model": "moving_maxima", "params": {"r": 2, "q": 0.9}}
    response = client.post("/api/window-law", json={"spec": spec})
    assert response.status_code == 400
    assert response.get_json()["error"] == "BadArgument"


def test_simulate_endpoint(client):
    spec = {"model": "urn", "params": {"g": 1, "y": 1, "r_balls": 1}, "seed": 2}
    data = client.post("/api/simulate", json={"spec": spec, "length": 10_000, "seed": 5}).get_json()
    assert data["length"] == 10_000
    assert data["seed"] == 5
    assert data["stationary_marginal"] == pytest.approx(0.5)


def test_simulate_endpoint_limits_length(client):
    spec = {"model": "markov_binary", "params": {"p01": 0.1, "p11": 0.6}}
    response = client.post("/api/simulate", json={"spec": spec, "length": MAX_SIMULATE_LENGTH + 1})
    assert response.status_code == 400
