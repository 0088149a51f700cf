"""ジョブ（JobSpec）の解決と実行"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.config.settings import Settings
from src.models.descriptors import DescriptorBase, IdealSpec, RangeSet
from src.models.errors import HypothesisFailed, LiteralParseError, NotDivergent, WorkbenchError
from src.models.matrices import BlockMatrix
from src.models.schemas import JobResult, JobSpec, Witness
from src.models.sequences import DoubleSequence
from src.services.conditions import ConditionService, combine_status
from src.services.literals import parse_descriptor, parse_ideal, parse_target
from src.services.operator_matrix import load_matrix_file
from src.services.pringsheim import PringsheimService
from src.services.witnesses import WitnessService
from src.services.zoo import builtin_double, builtin_family, builtin_kernel, builtin_matrix

logger = logging.getLogger(__name__)

EXIT_CODES = {"Pass": 0, "Regular": 0, "Fail": 1, "NotRegular": 1, "Inconclusive": 2}
# 解析・解決に失敗したとき
EXIT_INVALID = 3
# 実行中のその他のエラー
EXIT_ERROR = 4

Table = List[List[Any]]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"JSON に変換できない値です: {type(value).__name__}")


def dump_report(report: Dict[str, Any]) -> str:
    """キー順を固定した JSON（同じ入力からは同じバイト列）"""
    return json.dumps(report, sort_keys=True, ensure_ascii=False, indent=2, default=_jsonable)


def write_table(path: Path, table: Table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        csv.writer(f).writerows(table)


class JobService:
    """CLI と API の共通の実行器"""

    def __init__(self, settings: Settings):
        self.settings = settings
        self.conditions = ConditionService(settings)
        self.witnesses = WitnessService(settings, self.conditions)
        self.pringsheim = PringsheimService(settings, self.conditions)

    # ---- 参照の解決 ---------------------------------------------------------

    @staticmethod
    def resolve_matrix(ref: Optional[str]) -> BlockMatrix:
        if not ref:
            raise LiteralParseError("行列が指定されていません（--matrix）")
        if ref.endswith(".json"):
            return load_matrix_file(ref)
        return builtin_matrix(ref).matrix

    def resolve_double(self, ref: str) -> DoubleSequence:
        if ref.endswith(".csv"):
            return self.pringsheim.load_double_csv(ref)
        return builtin_double(ref).sequence

    @staticmethod
    def _samples(job: JobSpec) -> Optional[List[DescriptorBase]]:
        return [parse_descriptor(s) for s in job.samples] or None

    def _resolve(self, job: JobSpec) -> Tuple[BlockMatrix, IdealSpec, IdealSpec, np.ndarray]:
        A = self.resolve_matrix(job.matrix)
        I = parse_ideal(job.ideal_i)
        J = parse_ideal(job.ideal_j)
        T = parse_target(job.target, A.m, A.d)
        return A, I, J, T

    # ---- 実行 ---------------------------------------------------------------

    def run(self, job: JobSpec) -> JobResult:
        """ジョブを実行し、out が指定されていればレポートと CSV を書き出す"""
        handlers = {
            "check": self._check,
            "transform": self._transform,
            "witness": self._witness,
            "hahn-schur": self._hahn_schur,
            "pringsheim": self._pringsheim,
            "report": self._report,
        }
        logger.info(f"ジョブを開始します: {job.task} (matrix={job.matrix}, horizon={job.horizon})")
        overall, report, tables = handlers[job.task](job)
        report = {"task": job.task, "job": job.model_dump(), **report}
        artifacts = self._write(job, report, tables) if job.out else []
        exit_code = EXIT_CODES[overall]
        logger.info(f"ジョブが完了しました: {job.task}, 総合 {overall}, 終了コード {exit_code}")
        return JobResult(
            task=job.task,
            exit_code=exit_code,
            overall=overall,
            report=json.loads(dump_report(report)),
            artifacts=artifacts,
            tables=tables,
        )

    def _write(self, job: JobSpec, report: Dict[str, Any], tables: Dict[str, Table]) -> List[str]:
        out = Path(job.out)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / f"{job.task}.json"
        report_path.write_text(dump_report(report) + "\n", encoding="utf-8")
        artifacts = [str(report_path)]
        for name in sorted(tables):
            path = out / f"{job.task}_{name}.csv"
            write_table(path, tables[name])
            artifacts.append(str(path))
        logger.info(f"成果物を書き出しました: {out}")
        return artifacts

    # ---- タスク -------------------------------------------------------------

    def _check(self, job: JobSpec) -> Tuple[str, Dict[str, Any], Dict[str, Table]]:
        A, I, J, T = self._resolve(job)
        E_samples = self._samples(job)
        if job.conditions:
            verdicts = self.conditions.check_conditions(A, T, I, J, job.conditions, job.horizon, job.tol, E_samples)
            conditions = [v.model_dump() for v in verdicts.values()]
            overall = combine_status([v.status for v in verdicts.values()])
            report: Dict[str, Any] = {"conditions": conditions}
        else:
            verdict = self.conditions.regular_verdict(
                A,
                T,
                I,
                J,
                mode=job.mode,
                horizon=job.horizon,
                tol=job.tol,
                E_samples=E_samples,
                audit=job.audit,
                behavioral=job.behavioral,
                seed=job.seed,
            )
            conditions = [v.model_dump() for v in verdict.conditions]
            overall = verdict.overall
            report = {"regularity": verdict.model_dump()}
        table = [["id", "status", "horizon", "quantifier"]]
        table += [[c["id"], c["status"], c["horizon"], c["quantifier"]] for c in conditions]
        return overall, report, {"conditions": table, "rows": self._row_table(A, T, job.horizon)}

    def _row_table(self, A: BlockMatrix, T: np.ndarray, horizon: int) -> Table:
        table: Table = [["n", "abs_total", "group_norm_upper", "row_sum_deviation", "tail_upper"]]
        for r in self.conditions.row_diagnostics(A, T, horizon):
            table.append([r.n, r.abs_total, r.group_norm_upper, r.row_sum_deviation, r.tail_upper])
        return table

    def _transform(self, job: JobSpec) -> Tuple[str, Dict[str, Any], Dict[str, Table]]:
        A, I, J, T = self._resolve(job)
        family = builtin_family(job.family or "convergent(1)", I, A.d, self.settings)
        x = family.members(1, job.seed)[0]
        rows = parse_descriptor(job.rows) if job.rows else RangeSet(lo=0, hi=job.horizon)
        R = A.clamp_horizon(job.horizon)
        results = [self.conditions.matrix_service.transform(A, x, n, job.horizon) for n in range(R + 1)]
        values = np.array([r.value for r in results])
        tol = max(job.tol, self.settings.behavioral_tol)
        limit = self.conditions.ideal_service.lim_of(J, values, tol)
        expected = None if x.limit is None else (T @ x.limit)
        if expected is None or limit.status != "Converged":
            overall = "Fail" if limit.status == "NoLimitDetected" and expected is not None else "Inconclusive"
            deviation = None
        else:
            deviation = float(np.abs(np.array(limit.estimate) - expected).max())
            overall = "Pass" if deviation <= tol else "Fail"
        mask = rows.mask(R)
        table: Table = [["n", *[f"value_{i}" for i in range(A.m)], "remainder_bound", "certified"]]
        table += [[r.n, *r.value, r.remainder_bound, r.certified] for r in results if mask[r.n]]
        report = {
            "family": family.name,
            "sequence": x.name,
            "limit": limit.model_dump(),
            "expected": None if expected is None else expected.tolist(),
            "deviation": deviation,
            "rows": [r.model_dump() for r in results if mask[r.n]],
        }
        return overall, report, {"transform": table}

    @staticmethod
    def _witness_tables(witness: Witness) -> Dict[str, Table]:
        stages: Table = [
            ["stage", "row", "cut", "block_lo", "block_hi", "block_value", "bound", "generator_index", "avoided_generator"]
        ]
        for r in witness.state.stages if witness.state else []:
            stages.append(
                [r.stage, r.row, r.cut, r.block[0], r.block[1], r.block_value, r.bound, r.generator_index, r.avoided_generator]
            )
        d = len(witness.x[0]) if witness.x else 0
        x_table: Table = [["k", *[f"x_{j}" for j in range(d)]]]
        x_table += [[k, *xk] for k, xk in enumerate(witness.x)]
        return {"stages": stages, "x": x_table}

    @staticmethod
    def _witness_summary(witness: Witness) -> Dict[str, Any]:
        return witness.model_dump(exclude={"x"})

    def _witness_overall(self, witness: Witness, tol: float) -> str:
        if witness.state is not None and witness.state.stages and witness.state.exhausted_at is None:
            if witness.achieved >= witness.state.stages[-1].bound - tol:
                return "Pass"
        if witness.achieved >= witness.target - tol:
            return "Pass"
        return "Inconclusive"

    def _witness(self, job: JobSpec) -> Tuple[str, Dict[str, Any], Dict[str, Table]]:
        A, _, J, _ = self._resolve(job)
        samples = self._samples(job)
        support = samples[0] if samples else None
        try:
            if job.mode == "unbounded":
                witness = self.witnesses.sliding_hump_unbounded(A, J, job.horizon, job.stages, allow_partial=True)
                overall = "Pass" if witness.achieved >= witness.target else "Inconclusive"
            else:
                witness = self.witnesses.sliding_hump(
                    A, J, job.horizon, job.stages, support=support, allow_partial=True
                )
                overall = self._witness_overall(witness, job.tol)
        except HypothesisFailed as e:
            logger.warning(f"証拠の仮定が成立しません: {e.failed}")
            return "Fail", {"failed_hypotheses": e.failed, "message": str(e)}, {}
        except NotDivergent as e:
            return "Fail", {"message": str(e)}, {}
        return overall, {"witness": self._witness_summary(witness)}, self._witness_tables(witness)

    def _hahn_schur(self, job: JobSpec) -> Tuple[str, Dict[str, Any], Dict[str, Table]]:
        A, _, J, _ = self._resolve(job)
        result = self.witnesses.hahn_schur_witness(A, J, job.horizon, job.stages, job.tol)
        overall = "Pass" if result.defect >= result.lower_bound - job.tol else "Fail"
        report = {"hahn_schur": result.model_dump(exclude={"witness": {"x"}})}
        tables = self._witness_tables(result.witness) if result.witness is not None else {}
        return overall, report, tables

    def _pringsheim(self, job: JobSpec) -> Tuple[str, Dict[str, Any], Dict[str, Table]]:
        if job.kernel:
            kernel = builtin_kernel(job.kernel)
            T = parse_target(job.target, 1, 1)
            verdict = self.pringsheim.rh_check(kernel, T, job.horizon, job.tol, job.behavioral)
            return verdict.overall, {"rh": verdict.model_dump()}, {}
        if not job.double:
            raise LiteralParseError("--double または --kernel が必要です")
        x = self.resolve_double(job.double)
        comparison = self.pringsheim.compare_limits(x, job.horizon, job.horizon, job.tol)
        overall = "Pass" if comparison["agree"] else "Fail"
        if comparison["p_lim"]["status"] == "Inconclusive" or comparison["ideal_lim"]["status"] == "Inconclusive":
            overall = "Inconclusive"
        table = self.pringsheim.export_transported(self.pringsheim.transport(x), job.horizon)
        return overall, {"pringsheim": comparison}, {"transported": table}

    def _oracle_audit(self, A: BlockMatrix, horizon: int) -> Dict[str, Any]:
        rows = list(range(min(8, horizon) + 1))
        cols = min(12, horizon + 1)
        oracle = self.witnesses.oracle_max_sign(A, rows, cols)
        sums = []
        for n in rows:
            row = A.row(n, cols - 1)
            sums.append(float(np.abs(row.blocks).sum()))
        agree = bool(np.allclose(oracle, sums))
        return {"rows": rows, "cols": cols, "oracle": oracle, "group_norms": sums, "agree": agree}

    def _report(self, job: JobSpec) -> Tuple[str, Dict[str, Any], Dict[str, Table]]:
        """正則性の全条件、行ごとの集計、証拠の試行をまとめた監査レポート"""
        A, I, J, T = self._resolve(job)
        verdict = self.conditions.regular_verdict(
            A,
            T,
            I,
            J,
            mode=job.mode,
            horizon=job.horizon,
            tol=job.tol,
            E_samples=self._samples(job),
            audit=True,
            behavioral=job.behavioral,
            seed=job.seed,
        )
        report: Dict[str, Any] = {"regularity": verdict.model_dump()}
        tables: Dict[str, Table] = {"rows": self._row_table(A, T, job.horizon)}
        try:
            witness = self.witnesses.sliding_hump(A, J, job.horizon, job.stages, allow_partial=True)
            report["witness"] = self._witness_summary(witness)
            tables.update(self._witness_tables(witness))
        except WorkbenchError as e:
            logger.warning(f"証拠を構成できませんでした: {e}")
            report["witness"] = {"error": type(e).__name__, "message": str(e)}
        if A.is_scalar:
            report["oracle"] = self._oracle_audit(A, job.horizon)
        return verdict.overall, report, tables
