"""スライディングハンプ法による証拠系列の構成

いずれの構成も段ごとに決定的で、同じ入力からは同じ系列が得られる。
"""

import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import Settings
from src.models.descriptors import ArithmeticProgression, DescriptorBase, FiniteSet, IdealSpec, RangeSet
from src.models.errors import (
    HorizonExhausted,
    HypothesisFailed,
    NotDivergent,
    UnsupportedIdeal,
    WorkbenchError,
    ZeroOperator,
)
from src.models.matrices import ONE_NORMS, BlockMatrix, NormContext, RowSlice, extreme_points, sign_vectors
from src.models.schemas import DivergenceWitness, HahnSchurResult, SlidingHumpState, StageRecord, Witness
from src.services.conditions import FIN, ConditionService
from src.services.ideal_core import IdealService
from src.services.operator_matrix import MatrixService, growth_verdict

logger = logging.getLogger(__name__)

# oracle_max_sign で一度に展開する符号ベクトルの桁数
_ORACLE_LOW_BITS = 12
# E を等差数列として記述するときの最大公差
_MAX_AP_STEP = 16


def _fraction_norm(values: Sequence[Fraction], codomain_norm: str) -> Fraction:
    if not values:
        return Fraction(0)
    if codomain_norm == "one":
        return sum((abs(v) for v in values), Fraction(0))
    return max(abs(v) for v in values)


def describe_support(mask: np.ndarray) -> DescriptorBase:
    """真偽列を等差数列（公差 ≤ 16）か有限集合で記述"""
    ks = np.arange(len(mask))
    if not mask.any():
        return FiniteSet()
    for step in range(1, _MAX_AP_STEP + 1):
        for offset in range(step):
            candidate = (ks >= offset) & ((ks - offset) % step == 0)
            if np.array_equal(candidate, mask):
                return ArithmeticProgression(offset=offset, step=step)
    return FiniteSet(values=tuple(int(k) for k in np.flatnonzero(mask)))


class WitnessService:
    """証拠系列の構成サービス"""

    def __init__(self, settings: Settings, condition_service: Optional[ConditionService] = None):
        self.settings = settings
        self.conditions = condition_service or ConditionService(settings)
        self.ideal_service: IdealService = self.conditions.ideal_service
        self.matrix_service: MatrixService = self.conditions.matrix_service

    # ---- 行ごとの部品 -------------------------------------------------------

    @staticmethod
    def _unit(A: BlockMatrix) -> np.ndarray:
        e0 = np.zeros(A.d)
        e0[0] = 1.0
        return e0

    @staticmethod
    def _row(A: BlockMatrix, t: int, H: int, support: Optional[DescriptorBase]) -> RowSlice:
        row = A.row(t, H)
        if support is None or not len(row.ks):
            return row
        return row.restrict(support.mask(H)[row.ks])

    def _row_bounds(self, A: BlockMatrix, row: RowSlice, ctx: NormContext) -> Tuple[float, float]:
        """‖A_{t,·}‖ の安価な上下界。スカラー・階数1・正作用素では厳密"""
        if not len(row.ks):
            return 0.0, 0.0
        if A.is_scalar:
            value = math.fsum(np.abs(row.blocks).reshape(-1))
            return value, value
        if A.rank_one is not None:
            a = np.asarray(A.rank_one.scalar(row.n, row.ks), dtype=float)
            value = math.fsum(np.abs(a)) * self.matrix_service.op_norm_block(A.rank_one.A0, ctx)
            return value, value
        if A.nonnegative and ctx.domain_norm == "sup_unit":
            value = float(ctx.vector_norm(row.apply_unit()))
            return value, value
        lower = float(row.entry_abs_sums().max(initial=0.0))
        return lower, math.fsum(row.op_norms(ctx))

    def _best_extreme(self, M: np.ndarray, ctx: NormContext) -> np.ndarray:
        points = extreme_points(M.shape[1], ctx)
        images = ctx.vector_norm(np.einsum("ij,pj->pi", M, points), axis=1)
        return points[int(np.argmax(images))]

    def _block_choice(self, A: BlockMatrix, row: RowSlice, ctx: NormContext) -> Tuple[float, np.ndarray]:
        """ブロック上の群ノルムの最大化点"""
        if not len(row.ks):
            return 0.0, np.zeros((0, A.d))
        if A.rank_one is not None and not A.is_scalar:
            A0 = np.asarray(A.rank_one.A0, dtype=float)
            a = np.asarray(A.rank_one.scalar(row.n, row.ks), dtype=float)
            best = self._best_extreme(A0, ctx)
            xs = np.where(a < 0, -1.0, 1.0)[:, None] * best[None, :]
            return math.fsum(np.abs(a)) * float(ctx.vector_norm(A0 @ best)), xs
        bound = self.matrix_service.group_norm_of_row(row, ctx, "auto", A.nonnegative)
        return bound.lower, np.asarray(bound.maximizer, dtype=float).reshape(len(row.ks), A.d)

    def _tail_cut(self, A: BlockMatrix, row: RowSlice, H: int, m_prev: int, eps: float, ctx: NormContext) -> Optional[int]:
        """‖A_{s,>m}‖ ≤ eps となる最小の m > m_prev（なければ None）"""
        beyond = self.matrix_service.certified_tail(A, row.n, H)
        need = eps - (beyond or 0.0)
        if need < 0:
            return None
        norms = row.op_norms(ctx)
        suffix = np.concatenate([np.cumsum(norms[::-1])[::-1], [0.0]])
        # suffix[i + 1] は列 ks[i] より後ろの和
        ok = np.flatnonzero(suffix[1:] <= need)
        m = int(row.ks[ok[0]]) if len(ok) else H
        if suffix[0] <= need:
            m = m_prev + 1
        m = max(m, m_prev + 1)
        return m if m <= H else None

    def _require(self, A: BlockMatrix, J: IdealSpec, horizon: int, ids: Sequence[str], ctx: NormContext) -> None:
        hyp_horizon = min(horizon, self.settings.default_horizon)
        results = self.conditions.check_conditions(A, np.zeros((A.m, A.d)), FIN, J, ids, hyp_horizon, ctx=ctx)
        failed = [cid for cid, verdict in results.items() if verdict.status != "Pass"]
        if failed:
            logger.error(f"構成の仮定が成立しません: {failed}")
            raise HypothesisFailed(failed, f"{A.name}: 仮定 {', '.join(failed)} がホライズン {hyp_horizon} で Pass になりません")

    def _measure(self, A: BlockMatrix, x: np.ndarray, rows: Sequence[int], H: int, ctx: NormContext) -> np.ndarray:
        out = np.zeros(len(rows))
        for i, t in enumerate(rows):
            row = A.row(t, H)
            if len(row.ks):
                out[i] = float(ctx.vector_norm(row.apply(x[row.ks])))
        return out

    @staticmethod
    def _support_literal(support: Optional[DescriptorBase], H: int) -> str:
        return support.to_literal() if support is not None else RangeSet(lo=0, hi=H).to_literal()

    # ---- 有界なスライディングハンプ ----------------------------------------

    def sliding_hump(
        self,
        A: BlockMatrix,
        J: IdealSpec,
        horizon: int,
        stages: int,
        ctx: NormContext = ONE_NORMS,
        support: Optional[DescriptorBase] = None,
        allow_partial: bool = False,
        check_hypotheses: bool = True,
    ) -> Witness:
        """𝒥-limsup ‖A_n x‖ = 𝒥-limsup ‖A_{n,ω}‖ となる単位球面上の x を構成する"""
        if not J.countably_generated:
            raise UnsupportedIdeal(f"証拠の構成には可算生成の 𝒥 が必要です: {J.to_literal()}")
        if stages < 1:
            raise ValueError(f"段数は 1 以上である必要があります: {stages}")
        if check_hypotheses:
            self._require(A, J, horizon, ("T1♭", "T3♮", "T6♭"), ctx)
        H = horizon
        R = A.clamp_horizon(min(horizon, self.settings.limsup_horizon))
        logger.info(f"スライディングハンプを開始します: {A.name}, 𝒥={J.to_literal()}, 行 ≤ {R}, 段数 {stages}")

        lower = np.zeros(R + 1)
        upper = np.zeros(R + 1)
        norm_sums = np.zeros(R + 1)
        for t in range(R + 1):
            row = self._row(A, t, H, support)
            lower[t], upper[t] = self._row_bounds(A, row, ctx)
            norm_sums[t] = float(row.op_norms(ctx).sum())
        eta_low = self.ideal_service.limsup_of(J, lower).value
        eta0 = self.ideal_service.limsup_of(J, upper).value
        slack = max(eta0 - eta_low, self.settings.limit_tol)

        unit = self._unit(A)
        on = support.mask(H) if support is not None else np.ones(H + 1, dtype=bool)
        x = np.where(on[:, None], unit[None, :], 0.0)
        if eta0 <= self.settings.limit_tol:
            logger.info("η₀ = 0 のため任意の単位ベクトル列を証拠とします")
            values = self._measure(A, x, range(R + 1), H, ctx)
            return Witness(
                x=x.tolist(),
                support=self._support_literal(support, H),
                rows=[],
                achieved=self.ideal_service.limsup_of(J, values).value,
                target=eta0,
                horizon=H,
                state=SlidingHumpState(eta0=eta0, eta_bracket=[eta_low, eta0]),
                diagnostic={"degenerate": True},
            )

        index = J.generator_index_array(R)
        base_eps = max(eta_low, self.settings.limit_tol)
        records: List[StageRecord] = []
        s_prev: Optional[int] = None
        m_prev = -1
        exhausted: Optional[int] = None
        for n in range(stages + 1):
            eps = base_eps / 2**n
            band = eta0 / 2**n + slack
            in_E = (upper >= eta0 - band) & (lower <= eta0 + band)
            start = 0 if s_prev is None else s_prev + 1
            avoided = -1 if s_prev is None else int(index[s_prev])
            chosen: Optional[int] = None
            admissible = 0
            for t in range(start, R + 1):
                if not in_E[t] or index[t] <= avoided:
                    continue
                if m_prev >= 0:
                    row = self._row(A, t, H, support)
                    prefix = row.restrict(row.ks <= m_prev)
                    if self._row_bounds(A, prefix, ctx)[1] > eps:
                        continue
                admissible += 1
                chosen = t
                break
            if chosen is None:
                exhausted = n
                break
            row = self._row(A, chosen, H, support)
            m = self._tail_cut(A, row, H, m_prev, eps, ctx)
            if m is None:
                exhausted = n
                break
            block = row.restrict((row.ks > m_prev) & (row.ks <= m))
            _, xs = self._block_choice(A, block, ctx)
            x[block.ks] = xs
            records.append(
                StageRecord(
                    stage=n,
                    row=chosen,
                    cut=m,
                    block=[m_prev + 1, m],
                    block_value=0.0,
                    bound=max(0.0, eta0 * (1 - 2.0 ** (3 - n))),
                    generator_index=int(index[chosen]),
                    avoided_generator=avoided,
                    candidates={"E": int(in_E[start:].sum()), "S": admissible},
                )
            )
            logger.debug(f"段 {n}: s={chosen}, m={m}, ε={eps:.3g}")
            s_prev, m_prev = chosen, m

        if m_prev < H:
            last = self._row(A, R, H, support)
            rest = last.restrict(last.ks > m_prev)
            _, xs = self._block_choice(A, rest, ctx)
            x[rest.ks] = xs
        if exhausted is not None:
            logger.warning(f"段 {exhausted} がホライズン内で完了しませんでした")
            if not allow_partial:
                raise HorizonExhausted(exhausted, f"段 {exhausted} の s_n または m_n がホライズン {H} 内に存在しません")

        values = self._measure(A, x, range(R + 1), H, ctx)
        chosen_rows = [r.row for r in records]
        records = [r.model_copy(update={"block_value": float(values[r.row])}) for r in records]
        achieved = self.ideal_service.limsup_of(J, values).value
        logger.info(f"スライディングハンプが完了しました: η₀={eta0:.6g}, 実測 {achieved:.6g}, 段 {len(records)}")
        return Witness(
            x=x.tolist(),
            support=self._support_literal(support, H),
            rows=chosen_rows,
            achieved=achieved,
            target=eta0,
            horizon=H,
            row_values=[float(values[s]) for s in chosen_rows],
            state=SlidingHumpState(eta0=eta0, eta_bracket=[eta_low, eta0], stages=records, exhausted_at=exhausted),
            diagnostic={
                "rows_measured": R,
                "completed_stages": len(records),
                "sum_of_norms": self.ideal_service.limsup_of(J, norm_sums).value,
            },
        )

    # ---- 非有界なスライディングハンプ --------------------------------------

    def sliding_hump_unbounded(
        self,
        A: BlockMatrix,
        J: IdealSpec,
        horizon: int,
        stages: int,
        ctx: NormContext = ONE_NORMS,
        allow_partial: bool = False,
        check_hypotheses: bool = True,
    ) -> Witness:
        """行ノルムが 𝒥 に沿って発散するとき ‖A_{s_n} x‖ ≥ n − 5 となる x を構成する"""
        if not J.countably_generated:
            raise UnsupportedIdeal(f"証拠の構成には可算生成の 𝒥 が必要です: {J.to_literal()}")
        if check_hypotheses:
            self._require(A, J, horizon, ("T3♮", "T5"), ctx)
        H = horizon
        R = A.clamp_horizon(horizon)
        norms: dict = {}

        def row_norm(t: int) -> float:
            if t not in norms:
                norms[t] = self._row_bounds(A, A.row(t, H), ctx)[0]
            return norms[t]

        grid = sorted({int(round(v)) for v in np.linspace(0, R, 64)})
        sampled = np.array([row_norm(t) for t in grid])
        trail = [float(sampled[np.array(grid) <= p].max()) for p in (R // 4, R // 2, R)]
        status, evidence = growth_verdict(trail, self.settings)
        if status == "Pass":
            raise NotDivergent(f"{A.name} の行ノルムは有界です（sup ≈ {trail[-1]:.6g}）")
        logger.info(f"非有界スライディングハンプを開始します: {A.name}, 行 ≤ {R}, 段数 {stages}")

        x = np.tile(self._unit(A), (H + 1, 1))
        index = J.generator_index_array(R)
        records: List[StageRecord] = []
        s_prev: Optional[int] = None
        m_prev = -1
        exhausted: Optional[int] = None
        for n in range(1, stages + 1):
            start = 0 if s_prev is None else s_prev + 1
            avoided = -1 if s_prev is None else int(index[s_prev])
            chosen: Optional[int] = None
            for t in range(start, R + 1):
                if index[t] <= avoided or row_norm(t) < n:
                    continue
                if m_prev >= 0:
                    row = A.row(t, H)
                    prefix = row.restrict(row.ks <= m_prev)
                    if len(prefix.ks) and float(ctx.vector_norm(prefix.apply(x[prefix.ks]))) > 1.0:
                        continue
                chosen = t
                break
            if chosen is None:
                exhausted = n
                break
            row = A.row(chosen, H)
            m = self._tail_cut(A, row, H, m_prev, 1.0, ctx)
            if m is None:
                exhausted = n
                break
            block = row.restrict((row.ks > m_prev) & (row.ks <= m))
            _, xs = self._block_choice(A, block, ctx)
            x[block.ks] = xs
            records.append(
                StageRecord(
                    stage=n,
                    row=chosen,
                    cut=m,
                    block=[m_prev + 1, m],
                    block_value=0.0,
                    bound=float(n - 5),
                    generator_index=int(index[chosen]),
                    avoided_generator=avoided,
                )
            )
            logger.debug(f"段 {n}: s={chosen}, m={m}, ‖A_s‖ ≥ {row_norm(chosen):.3g}")
            s_prev, m_prev = chosen, m

        if exhausted is not None:
            logger.warning(f"段 {exhausted} がホライズン内で完了しませんでした")
            if not allow_partial:
                raise HorizonExhausted(exhausted, f"段 {exhausted} の行がホライズン {R} 内に存在しません")
        chosen_rows = [r.row for r in records]
        values = self._measure(A, x, chosen_rows, H, ctx)
        records = [r.model_copy(update={"block_value": float(v)}) for r, v in zip(records, values)]
        completed = len(records)
        logger.info(f"非有界スライディングハンプが完了しました: 段 {completed}")
        return Witness(
            x=x.tolist(),
            support=RangeSet(lo=0, hi=H).to_literal(),
            rows=chosen_rows,
            achieved=float(values[-1]) if completed else 0.0,
            target=float(completed - 5),
            horizon=H,
            row_values=[float(v) for v in values],
            state=SlidingHumpState(
                eta0=trail[-1], eta_bracket=[trail[-1], trail[-1]], stages=records, exhausted_at=exhausted
            ),
            diagnostic={"row_norm_trail": trail, **evidence, "completed_stages": completed},
        )

    # ---- Hahn–Schur ---------------------------------------------------------

    def hahn_schur_witness(
        self,
        A: BlockMatrix,
        J: IdealSpec,
        horizon: int,
        stages: int,
        tol: Optional[float] = None,
    ) -> HahnSchurResult:
        """±1 の証拠から E = {k : x_k = 1} を取り出し、Σ_{k∈E} a_{n,k} の欠損を測る"""
        if not A.is_scalar:
            raise WorkbenchError(f"Hahn–Schur の証拠はスカラー行列のみ対応します: {A.name}")
        tol = self.settings.limit_tol if tol is None else tol
        H = horizon
        R = A.clamp_horizon(min(horizon, self.settings.limsup_horizon))
        abs_rows = np.zeros(R + 1)
        sums = np.zeros(R + 1)
        for t in range(R + 1):
            values = A.row(t, H).blocks.reshape(-1)
            abs_rows[t] = math.fsum(np.abs(values))
            sums[t] = math.fsum(values)
        eta0 = self.ideal_service.limsup_of(J, abs_rows).value
        kappa = self.ideal_service.lim_of(J, sums, max(tol, self.settings.limit_tol)).value
        lower_bound = eta0 / 2 - abs(kappa) / 2
        if eta0 <= tol:
            logger.info("η₀ ≤ tol のため E = ∅ とします")
            return HahnSchurResult(
                E=FiniteSet().to_literal(), defect=0.0, eta0=eta0, row_sum_limit=kappa, lower_bound=lower_bound
            )
        trail = [float(abs_rows[: p + 1].max()) for p in (R // 4, R // 2, R)]
        if growth_verdict(trail, self.settings)[0] == "Fail":
            witness = self.sliding_hump_unbounded(A, J, horizon, stages, allow_partial=True)
        else:
            witness = self.sliding_hump(A, J, horizon, stages, allow_partial=True)
        x = np.asarray(witness.x)[: H + 1, 0]
        mask = x > 0
        E = describe_support(mask)
        defect_values = np.zeros(R + 1)
        for t in range(R + 1):
            row = A.row(t, H)
            if len(row.ks):
                defect_values[t] = abs(math.fsum(row.blocks.reshape(-1)[mask[row.ks]]))
        defect = self.ideal_service.limsup_of(J, defect_values).value
        logger.info(f"Hahn–Schur の証拠: E={E.to_literal()[:40]}, 欠損 {defect:.6g}, 下界 {lower_bound:.6g}")
        return HahnSchurResult(
            E=E.to_literal(),
            defect=defect,
            eta0=eta0,
            row_sum_limit=kappa,
            lower_bound=lower_bound,
            witness=witness,
        )

    # ---- 発散の証拠 ---------------------------------------------------------

    def divergence_witness(self, T_blocks: Sequence[np.ndarray], ctx: NormContext = ONE_NORMS) -> DivergenceWitness:
        """‖Σ_{k≤n} T_k x_k‖ ≥ n となるスカラー倍 x_k = κ_k y_k（有理数で厳密に計算）"""
        S: List[Fraction] = []
        kappas: List[Fraction] = []
        directions: List[np.ndarray] = []
        partial: List[Fraction] = []
        for n, block in enumerate(T_blocks):
            M = np.atleast_2d(np.asarray(block, dtype=float))
            if not np.any(M):
                raise ZeroOperator(f"T_{n} が零作用素です")
            if not S:
                S = [Fraction(0)] * M.shape[0]
            points = extreme_points(M.shape[1], ctx)
            images = np.einsum("ij,pj->pi", M, points)
            norms = ctx.vector_norm(images, axis=1)
            best = norms.max()
            # 最大ノルムの端点のうち、部分和と向きが揃うものを選ぶ
            choices = np.flatnonzero(norms >= best * (1 - 1e-12))
            exact_images = [[Fraction(float(v)) for v in images[p]] for p in choices]
            score = [
                _fraction_norm([s + v for s, v in zip(S, image)], ctx.codomain_norm) for image in exact_images
            ]
            pick = int(np.argmax([float(v) for v in score]))
            y = points[choices[pick]]
            Ty = exact_images[pick]
            Ty_norm = _fraction_norm(Ty, ctx.codomain_norm)
            kappa = Fraction(1) if n == 0 else (n + _fraction_norm(S, ctx.codomain_norm)) / Ty_norm
            S = [s + kappa * v for s, v in zip(S, Ty)]
            kappas.append(kappa)
            directions.append(y)
            partial.append(_fraction_norm(S, ctx.codomain_norm))
        return DivergenceWitness(
            kappas=[float(k) for k in kappas],
            directions=[y.tolist() for y in directions],
            x=[(float(k) * y).tolist() for k, y in zip(kappas, directions)],
            partial_norms=[float(p) for p in partial],
        )

    # ---- 正作用素 -----------------------------------------------------------

    def positive_witness(
        self, A: BlockMatrix, E: DescriptorBase, horizon: int, J: IdealSpec, ctx: NormContext = ONE_NORMS
    ) -> Witness:
        """非負行列では順序単位 𝟙 を E 上に置いた x が群ノルムを達成する"""
        if not A.nonnegative:
            raise WorkbenchError(f"順序単位による証拠には非負行列が必要です: {A.name}")
        ctx = NormContext(domain_norm="sup_unit", codomain_norm=ctx.codomain_norm)
        H = horizon
        R = A.clamp_horizon(min(horizon, self.settings.limsup_horizon))
        x = E.mask(H)[:, None] * np.ones((1, A.d))
        values = self._measure(A, x, range(R + 1), H, ctx)
        norms = np.array([self._row_bounds(A, self._row(A, t, H, E), ctx)[1] for t in range(R + 1)])
        return Witness(
            x=x.tolist(),
            support=E.to_literal(),
            rows=list(range(R + 1)),
            achieved=self.ideal_service.limsup_of(J, values).value,
            target=self.ideal_service.limsup_of(J, norms).value,
            horizon=H,
            row_values=values.tolist(),
            diagnostic={"group_norms": norms.tolist()},
        )

    # ---- 小さな例での全探索 -------------------------------------------------

    def oracle_max_sign(self, A: BlockMatrix, rows: Sequence[int], cols: int) -> List[float]:
        """各行 n で max_{s ∈ {±1}^cols} |Σ_{k<cols} a_{n,k} s_k| を全探索で求める"""
        if not A.is_scalar:
            raise WorkbenchError("符号の全探索はスカラー行列のみ対応します")
        if not 1 <= cols <= 20:
            raise ValueError(f"列数は 1 以上 20 以下である必要があります: {cols}")
        low_bits = min(cols, _ORACLE_LOW_BITS)
        low_signs = sign_vectors(low_bits)
        high_signs = sign_vectors(cols - low_bits) if cols > low_bits else np.ones((1, 0))
        out = []
        for n in rows:
            a = A.evaluate(n, np.arange(cols)).reshape(-1)
            low = low_signs @ a[:low_bits]
            high = high_signs @ a[low_bits:]
            out.append(float(np.abs(high[:, None] + low[None, :]).max()))
        return out
