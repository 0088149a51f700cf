import pytest
from unittest.mock import Mock, patch
from fastapi import FastAPI
from fastapi.testclient import TestClient

from src.main import create_app, main


def _mock_settings(**overrides) -> Mock:
    mock_settings = Mock()
    mock_settings.app_name = "Test Workbench API"
    mock_settings.version = "0.1.0"
    mock_settings.debug = False
    mock_settings.log_level = "INFO"
    mock_settings.api_host = "0.0.0.0"
    mock_settings.api_port = 8000
    mock_settings.default_horizon = 1024
    mock_settings.limit_tol = 1e-6
    mock_settings.limsup_horizon = 4096
    for key, value in overrides.items():
        setattr(mock_settings, key, value)
    return mock_settings


class TestCreateApp:
    """create_app 関数のテスト"""

    @patch("src.main.get_settings")
    def test_create_app_basic_configuration(self, mock_get_settings):
        """基本的なアプリケーション設定をテスト"""
        mock_get_settings.return_value = _mock_settings(version="1.0.0")

        app = create_app()

        assert isinstance(app, FastAPI)
        assert app.title == "Test Workbench API"
        assert app.version == "1.0.0"
        assert app.description == "イデアル収束のもとでの行列の正則性を数値的に検証するAPI"

    @patch("src.main.get_settings")
    def test_create_app_middleware_configuration(self, mock_get_settings):
        """CORS ミドルウェアの設定をテスト"""
        mock_get_settings.return_value = _mock_settings()

        app = create_app()

        from fastapi.middleware.cors import CORSMiddleware

        assert any(getattr(m, "cls", None) == CORSMiddleware for m in app.user_middleware)

    @patch("src.main.get_settings")
    def test_create_app_router_inclusion(self, mock_get_settings):
        """ルーターが正しく含まれることをテスト"""
        mock_get_settings.return_value = _mock_settings()

        app = create_app()

        routes = [route.path for route in app.routes]
        assert "/api/v1/jobs" in routes
        assert "/api/v1/health" in routes
        assert "/" in routes

    @patch("src.main.get_settings")
    def test_create_app_root_endpoint(self, mock_get_settings):
        """ルートエンドポイントの動作をテスト"""
        mock_get_settings.return_value = _mock_settings(version="1.2.3")
        client = TestClient(create_app())

        response = client.get("/")

        assert response.status_code == 200
        data = response.json()
        assert data["message"] == "Ideal Summability Workbench API"
        assert data["version"] == "1.2.3"
        assert data["docs"] == "/docs"
        assert data["jobs"] == "/api/v1/jobs"


class TestLifespan:
    """lifespan のテスト"""

    @patch("src.main.get_job_service_container")
    @patch("src.main.get_settings")
    @patch("src.main.logger")
    def test_startup_and_shutdown(self, mock_logger, mock_get_settings, mock_get_container):
        """起動時にジョブサービスを用意し、終了時にリセットする"""
        settings = _mock_settings()
        mock_get_settings.return_value = settings
        container = mock_get_container.return_value
        app = create_app()

        with TestClient(app):
            mock_logger.info.assert_any_call("アプリケーションを起動しています...")
            container.get_or_create_job_service.assert_called_once_with(settings)
            container.reset.assert_not_called()

        container.reset.assert_called_once()
        mock_logger.info.assert_any_call("アプリケーションを終了しています...")

    @patch("src.main.get_job_service_container")
    @patch("src.main.get_settings")
    @patch("src.main.logger")
    def test_startup_failure_is_logged(self, mock_logger, mock_get_settings, mock_get_container):
        """ジョブサービスの初期化に失敗したら起動しない"""
        mock_get_settings.return_value = _mock_settings()
        mock_get_container.return_value.get_or_create_job_service.side_effect = RuntimeError("boom")
        app = create_app()

        with pytest.raises(Exception):
            with TestClient(app):
                pass

        mock_logger.error.assert_called_once_with("ジョブサービスの初期化に失敗しました: boom")


class TestMain:
    """main 関数のテスト"""

    @patch("src.main.uvicorn.run")
    @patch("src.main.create_app")
    @patch("src.main.get_settings")
    @patch("src.main.logger")
    def test_main_successful_execution(self, mock_logger, mock_get_settings, mock_create_app, mock_uvicorn_run):
        """正常なメイン関数の実行をテスト"""
        mock_get_settings.return_value = _mock_settings()
        mock_app = Mock()
        mock_create_app.return_value = mock_app

        main()

        mock_create_app.assert_called_once()
        mock_uvicorn_run.assert_called_once_with(mock_app, host="0.0.0.0", port=8000, reload=False)
        mock_logger.info.assert_called_with("サーバーを起動します: http://0.0.0.0:8000")


@pytest.mark.parametrize(
    "debug_mode,expected_reload",
    [
        (True, True),
        (False, False),
    ],
)
@patch("src.main.uvicorn.run")
@patch("src.main.create_app")
@patch("src.main.get_settings")
def test_main_debug_mode_parameter(mock_get_settings, mock_create_app, mock_uvicorn_run, debug_mode, expected_reload):
    """デバッグモードパラメータのパラメータ化テスト"""
    mock_get_settings.return_value = _mock_settings(debug=debug_mode)
    mock_app = Mock()
    mock_create_app.return_value = mock_app

    main()

    mock_uvicorn_run.assert_called_once_with(mock_app, host="0.0.0.0", port=8000, reload=expected_reload)
