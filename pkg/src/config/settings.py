from pydantic_settings import BaseSettings

from .sample_suites import SampleSuite, get_sample_suite_for_ideal


class Settings(BaseSettings):
    # API設定
    app_name: str = "Ideal Summability Workbench"
    version: str = "0.1.0"
    debug: bool = False
    log_level: str = "INFO"
    api_host: str = "0.0.0.0"
    api_port: int = 8000

    # ホライズン設定
    default_horizon: int = 1024

    # 判定しきい値
    limit_tol: float = 1e-6
    stabilization_tol: float = 1e-3
    divergence_growth: float = 0.5
    vanish_ratio: float = 0.7
    vanish_floor: float = 0.25
    persist_ratio: float = 0.9
    fail_floor: float = 1e-3
    density_threshold: float = 0.05
    summable_threshold: float = 0.05

    # 群ノルム設定
    exhaustive_log2_cap: int = 24

    # 条件チェック設定
    direction_count: int = 3
    columns_checked: int = 8
    sample_rows: int = 16

    # 証拠構成設定
    limsup_horizon: int = 4096

    # 挙動クロスチェック設定
    behavioral_trials: int = 20
    behavioral_horizon: int = 1024
    behavioral_tol: float = 5e-2

    # Pringsheim 設定
    corner_fraction: float = 0.5
    corner_grid: int = 128

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"

    def sample_suite(self, kind: str) -> SampleSuite:
        """イデアルの種類に対応するサンプル集を取得"""
        return get_sample_suite_for_ideal(kind)


def get_settings() -> Settings:
    return Settings()
