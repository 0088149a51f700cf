import pytest
from pydantic import ValidationError

from src.models.schemas import (
    ConditionVerdict,
    GroupNormBound,
    HealthResponse,
    IdealLimitReport,
    JobResult,
    JobSpec,
)


class TestJobSpec:
    """JobSpec スキーマのテスト"""

    def test_defaults(self):
        """デフォルト値が正しく設定されることをテスト"""
        job = JobSpec(task="check", matrix="cesaro")

        assert job.ideal_i == "fin"
        assert job.ideal_j == "fin"
        assert job.target == "I"
        assert job.horizon == 1024
        assert job.stages == 6
        assert job.mode == "auto"
        assert job.behavioral is True
        assert job.format == "json"

    def test_unknown_task_fails(self):
        """未知のタスクでValidationErrorが発生することをテスト"""
        with pytest.raises(ValidationError) as exc_info:
            JobSpec(task="plot")

        errors = exc_info.value.errors()
        assert any(error["loc"] == ("task",) for error in errors)

    @pytest.mark.parametrize("horizon", [0, 8, 15])
    def test_small_horizon_fails(self, horizon):
        """ホライズンは 16 以上"""
        with pytest.raises(ValidationError):
            JobSpec(task="check", horizon=horizon)

    @pytest.mark.parametrize("field,value", [("tol", 0.0), ("tol", -1e-3), ("stages", 0), ("format", "xml")])
    def test_invalid_values_fail(self, field, value):
        with pytest.raises(ValidationError):
            JobSpec(task="check", **{field: value})


class TestReports:
    """レポート系スキーマのテスト"""

    def test_ideal_limit_report_value(self):
        """value はスカラー系列の推定値"""
        report = IdealLimitReport(estimate=[0.5], lower=[0.4], upper=[0.6], horizon=64, status="Converged")
        assert report.value == 0.5

    def test_negative_horizon_fails(self):
        with pytest.raises(ValidationError):
            IdealLimitReport(estimate=[0.0], lower=[0.0], upper=[0.0], horizon=-1, status="Converged")

    def test_unknown_status_fails(self):
        with pytest.raises(ValidationError):
            IdealLimitReport(estimate=[0.0], lower=[0.0], upper=[0.0], horizon=1, status="Maybe")

    def test_group_norm_bound(self):
        bound = GroupNormBound(lower=1.0, upper=2.0, method="Sandwich", exact=False)
        assert bound.maximizer is None

    def test_condition_verdict_requires_id(self):
        with pytest.raises(ValidationError) as exc_info:
            ConditionVerdict(status="Pass", horizon=64)

        errors = exc_info.value.errors()
        assert any(error["loc"] == ("id",) for error in errors)

    def test_job_result_defaults(self):
        result = JobResult(task="check", exit_code=0, overall="Regular", report={})
        assert result.artifacts == []
        assert result.tables == {}


class TestHealthResponse:
    """HealthResponse スキーマのテスト"""

    def test_valid_health_response(self):
        """有効なHealthResponseが正しく作成されることをテスト"""
        response = HealthResponse(status="healthy", version="0.1.0", builtins=["cesaro"])

        assert response.status == "healthy"
        assert response.version == "0.1.0"
        assert response.builtins == ["cesaro"]

    def test_health_response_missing_required_fields(self):
        """必須フィールドが欠如している場合のValidationErrorをテスト"""
        with pytest.raises(ValidationError) as exc_info:
            HealthResponse(version="0.1.0", builtins=[])

        errors = exc_info.value.errors()
        assert any(error["loc"] == ("status",) for error in errors)
