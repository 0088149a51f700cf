import csv
import json
import os
import pytest

from src.models.errors import LiteralParseError, UnknownBuiltin
from src.models.schemas import JobSpec
from src.services.job_service import EXIT_CODES, JobService, dump_report


@pytest.fixture
def job_service(test_settings) -> JobService:
    return JobService(test_settings)


class TestDumpReport:
    """dump_report 関数のテスト"""

    def test_keys_are_sorted(self):
        """キー順に依らず同じ文字列になる"""
        assert dump_report({"b": 1, "a": 2}) == dump_report({"a": 2, "b": 1})

    def test_numpy_values(self):
        import numpy as np

        text = dump_report({"x": np.float64(0.5), "v": np.arange(3)})
        assert json.loads(text) == {"x": 0.5, "v": [0, 1, 2]}


class TestCheckTask:
    """check タスクのテスト"""

    def test_cesaro_is_regular(self, job_service):
        """Cesàro は Fin/Fin で正則（終了コード 0）"""
        job = JobSpec(task="check", matrix="cesaro", horizon=256, behavioral=False)

        result = job_service.run(job)

        assert result.overall == "Regular"
        assert result.exit_code == 0
        assert result.tables["conditions"][0] == ["id", "status", "horizon", "quantifier"]
        assert result.tables["rows"][0][0] == "n"
        assert result.report["regularity"]["theorem"]

    def test_wrong_target_is_not_regular(self, job_service):
        """T = 0 では NotRegular（終了コード 1）"""
        job = JobSpec(task="check", matrix="cesaro", target="0", horizon=256, behavioral=False)

        result = job_service.run(job)

        assert result.overall == "NotRegular"
        assert result.exit_code == 1

    def test_individual_conditions(self, job_service):
        """条件を指定した場合はそれぞれの判定を返す"""
        job = JobSpec(task="check", matrix="cesaro", conditions=["S1", "S3"], horizon=128)

        result = job_service.run(job)

        assert [c["id"] for c in result.report["conditions"]] == ["S1", "S3"]
        assert result.overall == "Pass"

    def test_missing_matrix_fails(self, job_service):
        with pytest.raises(LiteralParseError):
            job_service.run(JobSpec(task="check", horizon=64))

    def test_unknown_matrix_fails(self, job_service):
        with pytest.raises(UnknownBuiltin):
            job_service.run(JobSpec(task="check", matrix="nope", horizon=64))


class TestTransformTask:
    """transform タスクのテスト"""

    def test_cesaro_of_convergent_family(self, job_service):
        """収束列の Cesàro 変換は同じ極限に収束する"""
        job = JobSpec(
            task="transform", matrix="cesaro", family="convergent(1,geometric)", rows="range(0,3)", horizon=256
        )

        result = job_service.run(job)

        assert result.overall == "Pass"
        assert result.report["expected"] == [1.0]
        assert len(result.tables["transform"]) == 5
        assert result.tables["transform"][0] == ["n", "value_0", "remainder_bound", "certified"]


class TestWitnessTasks:
    """witness / hahn-schur タスクのテスト"""

    def test_cesaro_witness(self, job_service):
        job = JobSpec(task="witness", matrix="cesaro", horizon=1024, stages=6)

        result = job_service.run(job)

        assert result.overall == "Pass"
        assert result.tables["stages"][0][0] == "stage"
        assert len(result.tables["x"]) == 1026
        assert "x" not in result.report["witness"]

    def test_failed_hypotheses(self, job_service):
        """仮定が成立しない場合は Fail と失敗した条件"""
        job = JobSpec(task="witness", matrix="lower_ones", horizon=256, stages=4)

        result = job_service.run(job)

        assert result.exit_code == EXIT_CODES["Fail"]
        assert "T1♭" in result.report["failed_hypotheses"]

    def test_hahn_schur_alternating(self, job_service):
        job = JobSpec(task="hahn-schur", matrix="alternating", horizon=1024, tol=1e-2)

        result = job_service.run(job)

        assert result.overall == "Pass"
        assert result.report["hahn_schur"]["E"] == "ap(0,2)"


class TestPringsheimTask:
    """pringsheim タスクのテスト"""

    def test_rh_check(self, job_service):
        job = JobSpec(task="pringsheim", kernel="double_identity", horizon=256, target="1")
        assert job_service.run(job).overall == "Regular"

    def test_transported_table(self, job_service):
        """二重系列を移送した表 (t, m, n, value) を返す"""
        job = JobSpec(task="pringsheim", double="constant(2)", horizon=64)

        result = job_service.run(job)

        table = result.tables["transported"]
        assert table[0] == ["t", "m", "n", "value_0"]
        assert len(table) == 66
        assert result.report["pringsheim"]["p_lim"]["status"] == "Converged"

    def test_missing_double_fails(self, job_service):
        with pytest.raises(LiteralParseError):
            job_service.run(JobSpec(task="pringsheim", horizon=64))


class TestReportTask:
    """report タスクのテスト"""

    def test_report_contains_audit(self, job_service):
        """正則性・証拠・全探索の監査をまとめる"""
        job = JobSpec(task="report", matrix="cesaro", horizon=128, behavioral=False)

        result = job_service.run(job)

        assert set(result.report) >= {"regularity", "witness", "oracle"}
        assert result.report["oracle"]["agree"] is True
        assert "rows" in result.tables


class TestArtifacts:
    """成果物の書き出しのテスト"""

    def test_writes_report_and_tables(self, job_service, temp_dir):
        job = JobSpec(task="check", matrix="cesaro", horizon=64, behavioral=False, out=temp_dir)

        result = job_service.run(job)

        assert os.path.join(temp_dir, "check.json") in result.artifacts
        with open(os.path.join(temp_dir, "check_conditions.csv"), newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["id", "status", "horizon", "quantifier"]

    def test_reports_are_reproducible(self, job_service, temp_dir):
        """同じジョブからは同じバイト列のレポート"""
        job = JobSpec(task="check", matrix="euler(0.5)", horizon=64, out=temp_dir, seed=3)

        job_service.run(job)
        with open(os.path.join(temp_dir, "check.json"), "rb") as f:
            first = f.read()
        job_service.run(job)
        with open(os.path.join(temp_dir, "check.json"), "rb") as f:
            second = f.read()

        assert first == second
