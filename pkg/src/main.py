import logging
import sys
from contextlib import asynccontextmanager
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
import uvicorn

from src.api.jobs import get_job_service_container, router as jobs_router
from src.config.settings import get_settings

# ロギング設定
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """起動時にジョブサービスを用意し、終了時に破棄する"""
    settings = get_settings()
    container = get_job_service_container()
    logger.info("アプリケーションを起動しています...")
    logger.info(
        f"既定ホライズン {settings.default_horizon}, 許容誤差 {settings.limit_tol}, "
        f"limsup 推定の行上限 {settings.limsup_horizon}"
    )
    try:
        container.get_or_create_job_service(settings)
    except Exception as e:
        logger.error(f"ジョブサービスの初期化に失敗しました: {e}")
        raise
    yield
    container.reset()
    logger.info("アプリケーションを終了しています...")


def create_app() -> FastAPI:
    settings = get_settings()

    app = FastAPI(
        title=settings.app_name,
        version=settings.version,
        description="イデアル収束のもとでの行列の正則性を数値的に検証するAPI",
        lifespan=lifespan,
    )

    # CORS設定
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    app.include_router(jobs_router)

    @app.get("/")
    async def root():
        return {
            "message": "Ideal Summability Workbench API",
            "version": settings.version,
            "docs": "/docs",
            "jobs": "/api/v1/jobs",
        }

    return app


def main():
    """API サーバーのエントリーポイント"""
    settings = get_settings()
    logging.getLogger().setLevel(settings.log_level)

    app = create_app()

    logger.info(f"サーバーを起動します: http://{settings.api_host}:{settings.api_port}")
    uvicorn.run(app, host=settings.api_host, port=settings.api_port, reload=settings.debug)


if __name__ == "__main__":
    main()
