"""二重系列の Pringsheim 極限と、殻を ν₂ の層へ写す全単射 h による単一系列への移送"""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.config.settings import Settings
from src.models.descriptors import IdealSpec, nu2, nu2_array
from src.models.errors import InsufficientHorizon, LiteralParseError
from src.models.matrices import BlockMatrix, DoubleKernel
from src.models.schemas import IdealLimitReport, RegularityReport
from src.models.sequences import DoubleSequence, SequenceView
from src.services.conditions import ConditionService
from src.services.ideal_core import IdealService

logger = logging.getLogger(__name__)

NU2 = IdealSpec(kind="nu2")


class PairingBijection:
    """h: ω² → ω。殻 {min(m,n) = k} を Q_k = {t : ν₂(t) = k} に順序を保って写す

    殻 k は (k,k), (k,k+1), (k+1,k), (k,k+2), (k+2,k), … の順に、Q_k は昇順に
    並べる（0 は ν₂(0) = 0 により Q_0 の先頭）。
    """

    @staticmethod
    def _shell_position(m: np.ndarray, n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        k = np.minimum(m, n)
        j = np.abs(m - n)
        i = np.where(j == 0, 0, np.where(n > m, 2 * j - 1, 2 * j))
        return k, i

    @staticmethod
    def _level_element(k: np.ndarray, i: np.ndarray) -> np.ndarray:
        # Q_0 = {0, 1, 3, 5, …}, Q_k = {2^k·(2i+1)}
        # int64 に収まるのは k + log₂(2i+1) < 63 の範囲
        bits = k.astype(float) + np.log2(2.0 * i.astype(float) + 1.0)
        if np.any((k > 0) & (bits >= 63)):
            raise InsufficientHorizon(
                f"h の値が int64 を超えます（min(m,n) の最大 {int(k.max())}）。scalar の forward を使ってください"
            )
        first = np.where(i == 0, 0, 2 * i - 1)
        shift = np.minimum(k, 62)
        return np.where(k == 0, first, np.left_shift(np.int64(1), shift) * (2 * i + 1))

    def forward(self, m: int, n: int) -> int:
        """h(m, n)（任意精度の整数で計算）"""
        m, n = int(m), int(n)
        if m < 0 or n < 0:
            raise ValueError(f"自然数の組を指定してください: ({m}, {n})")
        k, j = min(m, n), abs(m - n)
        i = 0 if j == 0 else (2 * j - 1 if n > m else 2 * j)
        if k == 0:
            return 0 if i == 0 else 2 * i - 1
        return (1 << k) * (2 * i + 1)

    def forward_array(self, ms: np.ndarray, ns: np.ndarray) -> np.ndarray:
        ms = np.asarray(ms, dtype=np.int64)
        ns = np.asarray(ns, dtype=np.int64)
        k, i = self._shell_position(ms, ns)
        return self._level_element(k, i)

    def inverse(self, t: int) -> Tuple[int, int]:
        """h⁻¹(t)（任意精度の整数で計算）"""
        t = int(t)
        if t < 0:
            raise ValueError(f"自然数を指定してください: {t}")
        k = nu2(t)
        if k == 0:
            i = 0 if t == 0 else (t + 1) // 2
        else:
            i = ((t >> k) - 1) // 2
        if i % 2 == 1:
            j = (i + 1) // 2
            return k, k + j
        j = i // 2
        return k + j, k

    def inverse_array(self, ts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ts = np.asarray(ts, dtype=np.int64)
        k = nu2_array(ts)
        odd = np.right_shift(ts, k)
        i = np.where(k == 0, np.where(ts == 0, 0, (ts + 1) // 2), (odd - 1) // 2)
        j = np.where(i % 2 == 1, (i + 1) // 2, i // 2)
        ms = np.where(i % 2 == 1, k, k + j)
        ns = np.where(i % 2 == 1, k + j, k)
        return ms, ns


def build_h() -> PairingBijection:
    return PairingBijection()


class PringsheimService:
    """二重系列と二重行列の処理"""

    def __init__(self, settings: Settings, condition_service: Optional[ConditionService] = None):
        self.settings = settings
        self.conditions = condition_service or ConditionService(settings)
        self.ideal_service: IdealService = self.conditions.ideal_service
        self.h = build_h()

    # ---- Pringsheim 極限 ---------------------------------------------------

    def _corner(self, x: DoubleSequence, H: int) -> np.ndarray:
        lo = int(H * self.settings.corner_fraction)
        grid = np.unique(np.linspace(lo, H, min(self.settings.corner_grid, H - lo + 1)).round().astype(np.int64))
        ms, ns = np.meshgrid(grid, grid, indexing="ij")
        return x.sample_pairs(ms.ravel(), ns.ravel())

    def p_lim(self, x: DoubleSequence, horizon: int, tol: Optional[float] = None) -> IdealLimitReport:
        """深い隅 [H/2, H]² の平均を候補 η とし、隅での sup ‖x − η‖ で収束を判定"""
        tol = self.settings.limit_tol if tol is None else tol
        if horizon < 4:
            raise InsufficientHorizon(f"P-lim の推定にはホライズン 4 以上が必要です: {horizon}")
        estimates = []
        deviations = []
        for h in (horizon // 4, horizon // 2, horizon):
            corner = self._corner(x, h)
            eta = corner.mean(axis=0)
            estimates.append(eta)
            deviations.append(float(np.abs(corner - eta).max(initial=0.0)))
        eta = estimates[-1]
        if deviations[-1] < tol:
            status = "Converged"
        elif deviations[-1] <= 0.5 * deviations[0]:
            # 隅での振れ幅がまだ縮んでいる
            status = "Inconclusive"
        else:
            status = "NoLimitDetected"
        trail = np.array(estimates)
        logger.info(f"P-lim を推定しました: {x.name or '二重系列'}, η={eta.tolist()}, 判定 {status}")
        return IdealLimitReport(
            estimate=eta.tolist(),
            lower=trail.min(axis=0).tolist(),
            upper=trail.max(axis=0).tolist(),
            horizon=horizon,
            status=status,
            tol=tol,
            trail=trail.tolist(),
            diagnostic={"corner_deviation": deviations, "corner_start": int(horizon * self.settings.corner_fraction)},
        )

    # ---- 移送 ---------------------------------------------------------------

    def transport(self, x: DoubleSequence) -> SequenceView:
        """y_t = x_{h⁻¹(t)}"""

        def evaluator(t: int) -> np.ndarray:
            return x(*self.h.inverse(t))

        def vectorized(ts: np.ndarray) -> np.ndarray:
            ms, ns = self.h.inverse_array(ts)
            return x.sample_pairs(ms, ns)

        return SequenceView(
            evaluator,
            x.dim,
            vectorized=vectorized,
            limit=x.p_limit,
            ideal=NU2 if x.p_limit is not None else None,
            name=f"transport({x.name})",
        )

    def transport_inv(self, y: SequenceView) -> DoubleSequence:
        """x_{m,n} = y_{h(m,n)}"""

        def evaluator(m: int, n: int) -> np.ndarray:
            return y(self.h.forward(m, n))

        def vectorized(ms: np.ndarray, ns: np.ndarray) -> np.ndarray:
            return y.sample_at(self.h.forward_array(ms, ns))

        p_limit = y.limit if y.ideal is not None and y.ideal.kind == "nu2" else None
        return DoubleSequence(evaluator, y.dim, vectorized=vectorized, p_limit=p_limit, name=f"transport_inv({y.name})")

    def compare_limits(self, x: DoubleSequence, horizon: int, transport_horizon: int, tol: float) -> Dict[str, Any]:
        """P-lim と ℐ_P-lim（ν₂ イデアル）の両側を並べて報告"""
        p_report = self.p_lim(x, horizon, tol)
        y = self.transport(x)
        i_report = self.ideal_service.lim_of(NU2, y.sample(transport_horizon), tol)
        agree = p_report.status == i_report.status
        if agree and p_report.status == "Converged":
            agree = bool(np.max(np.abs(np.array(p_report.estimate) - np.array(i_report.estimate))) <= tol)
        if not agree:
            logger.warning(f"P-lim と ℐ_P-lim の判定が一致しません: {p_report.status} / {i_report.status}")
        return {
            "double": x.name,
            "declared": None if x.p_limit is None else x.p_limit.tolist(),
            "p_lim": p_report.model_dump(),
            "ideal_lim": i_report.model_dump(),
            "agree": agree,
        }

    # ---- 二重行列 -----------------------------------------------------------

    def transport_kernel(self, kernel: DoubleKernel) -> BlockMatrix:
        """a_{(m,n),(p,q)} を行・列とも h で移送したスカラー行列"""
        h = self.h

        def support(t: int) -> Tuple[Tuple[int, int], np.ndarray, np.ndarray, np.ndarray]:
            mn = h.inverse(t)
            ps, qs = kernel.support(mn)
            cols = h.forward_array(ps, qs)
            order = np.argsort(cols, kind="stable")
            return mn, ps[order], qs[order], cols[order]

        def row_support(t: int) -> np.ndarray:
            return support(t)[3]

        def rule(t: int, ks: np.ndarray) -> np.ndarray:
            mn, ps, qs, cols = support(t)
            values = np.asarray(kernel.rule(mn, ps, qs), dtype=float)
            out = np.zeros(len(ks))
            hit = np.isin(ks, cols)
            out[hit] = values[np.searchsorted(cols, ks[hit])]
            return out.reshape(len(ks), 1, 1)

        return BlockMatrix(
            1,
            1,
            rule,
            name=f"transport({kernel.name})",
            row_support=row_support,
            nonnegative=kernel.nonnegative,
        )

    def _map_rows_back(self, report: RegularityReport) -> RegularityReport:
        conditions = []
        for verdict in report.conditions:
            pairs = {
                f"{key}_pair": list(self.h.inverse(int(value)))
                for key, value in verdict.evidence.items()
                if ("row" in key or "column" in key) and isinstance(value, (int, np.integer)) and value >= 0
            }
            conditions.append(verdict.model_copy(update={"evidence": {**verdict.evidence, **pairs}}))
        return report.model_copy(update={"conditions": conditions})

    def rh_check(
        self,
        kernel: DoubleKernel,
        T: Any = 1.0,
        horizon: Optional[int] = None,
        tol: Optional[float] = None,
        behavioral: bool = False,
    ) -> RegularityReport:
        """移送した行列に ℐ = 𝒥 = ν₂ の R1–R6 を適用し、証拠の添字を h⁻¹ で戻す"""
        A = self.transport_kernel(kernel)
        logger.info(f"RH 正則性を判定します: {kernel.name}")
        report = self.conditions.regular_verdict(
            A,
            T,
            NU2,
            NU2,
            mode="generated_unbounded",
            horizon=horizon,
            tol=tol,
            behavioral=behavioral,
        )
        return self._map_rows_back(report)

    # ---- 入出力 -------------------------------------------------------------

    def load_double_csv(self, path: str) -> DoubleSequence:
        """行 m・列 n の格子 CSV を二重系列として読み込む"""
        try:
            with open(path, newline="", encoding="utf-8") as f:
                grid = np.array([[float(v) for v in row] for row in csv.reader(f) if row])
        except ValueError as e:
            raise LiteralParseError(f"CSV に数値でないセルがあります: {path}: {e}")
        if grid.ndim != 2 or grid.size == 0:
            raise LiteralParseError(f"CSV は空でない矩形格子である必要があります: {path}")
        rows, cols = grid.shape

        def vectorized(ms: np.ndarray, ns: np.ndarray) -> np.ndarray:
            if len(ms) and (ms.max() >= rows or ns.max() >= cols):
                raise InsufficientHorizon(f"CSV の格子 {rows}×{cols} の外を参照しました")
            return grid[ms, ns].reshape(-1, 1)

        def evaluator(m: int, n: int) -> float:
            return float(vectorized(np.array([m]), np.array([n]))[0, 0])

        logger.info(f"二重系列を読み込みました: {path} ({rows}×{cols})")
        return DoubleSequence(evaluator, 1, vectorized=vectorized, name=Path(path).stem)

    def export_transported(self, y: SequenceView, N: int, path: Optional[str] = None) -> List[List[Any]]:
        """移送した系列を (t, m, n, value_0, …) の行で返し、path があれば CSV に書く"""
        ts = np.arange(N + 1)
        ms, ns = self.h.inverse_array(ts)
        values = y.sample(N)
        header = ["t", "m", "n", *[f"value_{j}" for j in range(y.dim)]]
        rows: List[List[Any]] = [
            [int(t), int(m), int(n), *[float(v) for v in value]] for t, m, n, value in zip(ts, ms, ns, values)
        ]
        if path is not None:
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(header)
                writer.writerows(rows)
            logger.info(f"移送した系列を書き出しました: {path}")
        return [header, *rows]

