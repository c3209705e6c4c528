"""
HTTP API测试
"""
import pytest
from fastapi.testclient import TestClient

from saturn_mousehunter_obstacle_engine.api.app import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestServiceEndpoints:
    """健康检查与指标"""

    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_root(self, client):
        assert client.get("/").json()["status"] == "running"

    def test_metrics(self, client):
        client.get("/api/v1/problems/geometric_put_1d/assumptions", params={"probe_count": 8})
        assert "assumption_check_seconds" in client.get("/metrics").json()


class TestProblemRoutes:
    """问题注册表与假设抽查"""

    def test_list_problems(self, client):
        response = client.get("/api/v1/problems")
        assert response.status_code == 200
        payload = {p["problem_id"]: p for p in response.json()}
        assert set(payload) == {"geometric_put_1d", "geometric_put_3d", "indifference_1+1d", "indifference_2+1d"}
        assert payload["geometric_put_3d"]["dim"] == 3
        assert payload["geometric_put_3d"]["defaults"]["strike"] == 8.0

    def test_assumption_report(self, client):
        response = client.get("/api/v1/problems/geometric_put_1d/assumptions", params={"probe_count": 16})
        assert response.status_code == 200
        body = response.json()
        assert body["pass"]["v"] is False
        assert body["probe_count"] == 16

    def test_unknown_problem(self, client):
        response = client.get("/api/v1/problems/heston/assumptions")
        assert response.status_code == 400
        assert "heston" in response.json()["detail"]

    def test_hjb_report(self, client):
        response = client.get("/api/v1/problems/geometric_put_3d/hjb", params={"probe_count": 16})
        assert response.status_code == 200
        assert response.json()["pass_hjb"] is True

    def test_probe_count_validation(self, client):
        response = client.get("/api/v1/problems/geometric_put_1d/assumptions", params={"probe_count": 0})
        assert response.status_code == 422


class TestSolveRoutes:
    """求解、收敛率与参考值"""

    def test_solve(self, client):
        config = {
            "problem": "geometric_put_1d",
            "steps": [2],
            "paths": [1000],
            "seeds": [1],
            "override_assumptions": True,
            "probe_count": 16,
            "workers": 1,
        }
        response = client.post("/api/v1/solves", json=config)
        assert response.status_code == 200
        body = response.json()
        assert body["rows"][0]["status"] == "ok"
        assert body["rows"][0]["value"] >= 0.0
        assert "layers" not in body["reports"][0]

    def test_solve_rejects_large_budgets(self, client):
        config = {"problem": "geometric_put_1d", "steps": [2], "paths": [10_000_000]}
        response = client.post("/api/v1/solves", json=config)
        assert response.status_code == 400

    def test_solve_rejects_invalid_config(self, client):
        response = client.post("/api/v1/solves", json={"problem": "geometric_put_1d", "steps": []})
        assert response.status_code == 422

    def test_rates(self, client):
        response = client.post("/api/v1/rates", json={"values": [[0.1, 0.32], [0.2, 0.34]], "reference": 0.3})
        assert response.status_code == 200
        row = response.json()["rows"][0]
        assert row["h1"] == 0.1
        assert row["error_ratio"] == pytest.approx(0.5)

    def test_rates_need_two_points(self, client):
        response = client.post("/api/v1/rates", json={"values": [[0.1, 0.32]], "reference": 0.3})
        assert response.status_code == 400

    def test_geometric_put_reference(self, client):
        response = client.get("/api/v1/reference/geometric-put", params={"steps": 200})
        assert response.status_code == 200
        body = response.json()
        assert body["steps"] == 200
        assert body["european"] <= body["american"]
