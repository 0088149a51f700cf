from fastapi import APIRouter, HTTPException, Depends
from typing import Annotated
import logging

from src.models.errors import WorkbenchError
from src.models.schemas import HealthResponse, JobResult, JobSpec
from src.services.job_service import JobService
from src.services.zoo import BUILTIN_MATRICES
from src.config.settings import Settings, get_settings

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["jobs"])


class JobServiceContainer:
    """ジョブサービスのコンテナクラス（シングルトンパターン）"""

    _instance: "JobServiceContainer" = None
    _job_service: JobService = None

    def __new__(cls) -> "JobServiceContainer":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def get_or_create_job_service(self, settings: Settings) -> JobService:
        """ジョブサービスを取得または作成"""
        if self._job_service is None:
            logger.info("新しいジョブサービスインスタンスを作成中...")
            self._job_service = JobService(settings)
        return self._job_service

    def reset(self) -> None:
        """テスト用: インスタンスをリセット"""
        self._job_service = None


def get_job_service_container() -> JobServiceContainer:
    """ジョブサービスコンテナを取得"""
    return JobServiceContainer()


def get_job_service(
    settings: Annotated[Settings, Depends(get_settings)],
    container: Annotated[JobServiceContainer, Depends(get_job_service_container)],
) -> JobService:
    """ジョブサービスのインスタンスを取得"""
    return container.get_or_create_job_service(settings)


@router.post("/jobs", response_model=JobResult)
def run_job(job: JobSpec, job_service: Annotated[JobService, Depends(get_job_service)]) -> JobResult:
    """
    ジョブを実行し、レポートを返します。

    - **task**: check / transform / witness / hahn-schur / pringsheim / report
    - **matrix**: 組み込み行列のリテラル（例: `cesaro`, `euler(0.5)`）
    - **out**: 指定した場合のみ成果物をサーバー側に書き出します
    """
    try:
        logger.info(f"ジョブリクエストを受信: {job.task} (matrix={job.matrix})")
        return job_service.run(job)
    except WorkbenchError as e:
        logger.error(f"ジョブの入力が不正です: {e}")
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"ジョブ処理中にエラーが発生しました: {e}")
        raise HTTPException(status_code=500, detail="内部サーバーエラーが発生しました")


@router.get("/health", response_model=HealthResponse)
async def health_check(settings: Annotated[Settings, Depends(get_settings)]) -> HealthResponse:
    """
    APIの健全性をチェックします。
    """
    return HealthResponse(status="healthy", version=settings.version, builtins=list(BUILTIN_MATRICES))
