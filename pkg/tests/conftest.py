import tempfile
import pytest
from typing import Generator

from src.config.settings import Settings
from src.services.conditions import ConditionService
from src.services.ideal_core import IdealService
from src.services.operator_matrix import MatrixService
from src.services.pringsheim import PringsheimService
from src.services.witnesses import WitnessService
from src.services.zoo import builtin_matrix


@pytest.fixture(scope="session")
def test_settings() -> Settings:
    """テスト用の設定オブジェクトを提供"""
    return Settings(
        default_horizon=512,
        limsup_horizon=4096,
        behavioral_trials=4,
        behavioral_horizon=512,
        debug=True,
    )


@pytest.fixture
def temp_dir() -> Generator[str, None, None]:
    """一時ディレクトリを提供"""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield temp_dir


@pytest.fixture
def ideal_service(test_settings) -> IdealService:
    return IdealService(test_settings)


@pytest.fixture
def matrix_service(test_settings) -> MatrixService:
    return MatrixService(test_settings)


@pytest.fixture
def condition_service(test_settings) -> ConditionService:
    return ConditionService(test_settings)


@pytest.fixture
def witness_service(test_settings, condition_service) -> WitnessService:
    return WitnessService(test_settings, condition_service)


@pytest.fixture
def pringsheim_service(test_settings, condition_service) -> PringsheimService:
    return PringsheimService(test_settings, condition_service)


@pytest.fixture
def cesaro():
    """Cesàro 行列 a_{n,k} = 1/(n+1)·[k ≤ n]"""
    return builtin_matrix("cesaro").matrix
