import pytest
from fastapi.testclient import TestClient

from src.api.jobs import get_job_service, get_job_service_container
from src.main import create_app
from src.services.job_service import JobService


@pytest.mark.integration
class TestAPIIntegration:
    """API統合テスト"""

    @pytest.fixture
    def app(self, test_settings):
        """統合テスト用のFastAPIアプリケーション"""
        app = create_app()
        app.dependency_overrides[get_job_service] = lambda: JobService(test_settings)
        yield app
        app.dependency_overrides.clear()
        get_job_service_container().reset()

    @pytest.fixture
    def client(self, app):
        """統合テスト用のHTTPクライアント"""
        return TestClient(app)

    def test_check_job_flow(self, client):
        """check ジョブの実行からレポート取得まで"""
        response = client.post(
            "/api/v1/jobs",
            json={"task": "check", "matrix": "cesaro", "horizon": 64, "behavioral": False},
        )

        assert response.status_code == 200
        data = response.json()
        assert data["task"] == "check"
        assert data["overall"] == "Regular"
        assert data["exit_code"] == 0
        assert data["report"]["regularity"]["overall"] == "Regular"
        assert data["tables"]["conditions"][0] == ["id", "status", "horizon", "quantifier"]

    def test_not_regular_job(self, client):
        response = client.post(
            "/api/v1/jobs",
            json={"task": "check", "matrix": "cesaro", "target": "0", "horizon": 64, "behavioral": False},
        )

        assert response.status_code == 200
        assert response.json()["exit_code"] == 1

    def test_pringsheim_job(self, client):
        """二重系列の移送表を返す"""
        response = client.post("/api/v1/jobs", json={"task": "pringsheim", "double": "corner_decay", "horizon": 32})

        assert response.status_code == 200
        table = response.json()["tables"]["transported"]
        assert table[0] == ["t", "m", "n", "value_0"]
        assert len(table) == 34

    def test_unknown_matrix_returns_422(self, client):
        """未知の組み込み行列は 422"""
        response = client.post("/api/v1/jobs", json={"task": "check", "matrix": "nope", "horizon": 64})

        assert response.status_code == 422
        assert "nope" in response.json()["detail"]

    @pytest.mark.parametrize(
        "payload",
        [
            {"task": "check", "matrix": "cesaro", "horizon": 8},
            {"task": "plot", "matrix": "cesaro"},
            {"matrix": "cesaro"},
        ],
    )
    def test_invalid_job_spec_returns_422(self, client, payload):
        """JobSpec の検証エラーは 422"""
        response = client.post("/api/v1/jobs", json=payload)
        assert response.status_code == 422

    def test_unexpected_error_returns_500(self, app, client):
        """予期しない例外は 500"""

        class BrokenService:
            def run(self, job):
                raise RuntimeError("boom")

        app.dependency_overrides[get_job_service] = lambda: BrokenService()

        response = client.post("/api/v1/jobs", json={"task": "check", "matrix": "cesaro", "horizon": 64})

        assert response.status_code == 500
        assert response.json()["detail"] == "内部サーバーエラーが発生しました"

    def test_health_check(self, client):
        """ヘルスチェックは組み込み行列の一覧を返す"""
        response = client.get("/api/v1/health")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert "cesaro" in data["builtins"]


@pytest.mark.integration
class TestJobServiceContainer:
    """ジョブサービスコンテナのテスト"""

    def test_singleton(self, test_settings):
        container = get_job_service_container()
        try:
            first = container.get_or_create_job_service(test_settings)
            assert get_job_service_container() is container
            assert container.get_or_create_job_service(test_settings) is first
        finally:
            container.reset()

    def test_reset_creates_new_service(self, test_settings):
        container = get_job_service_container()
        first = container.get_or_create_job_service(test_settings)

        container.reset()

        assert container.get_or_create_job_service(test_settings) is not first
        container.reset()
