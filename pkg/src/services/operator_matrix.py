"""ブロックのノルム・群ノルム・尾部ノルム・A 変換"""

import json
import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config.settings import Settings
from src.models.descriptors import DescriptorBase, RangeSet
from src.models.errors import EmptyEvaluation, InsufficientHorizon, LiteralParseError, WorkbenchError
from src.models.matrices import (
    ONE_NORMS,
    BlockMatrix,
    NormContext,
    RankOne,
    RowSlice,
    block_op_norms,
    extreme_points,
)
from src.models.schemas import ConditionVerdict, GroupNormBound, TransformResult
from src.models.sequences import SequenceView

logger = logging.getLogger(__name__)

# 列挙の積を評価するときのチャンク要素数
_CHUNK_ELEMENTS = 1 << 22
# 証明書で探す ε の格子 2^{-j}
_EPS_GRID = [2.0 ** (-j) for j in range(0, 53)]


def growth_verdict(trail: List[float], settings: Settings) -> Tuple[str, Dict[str, float]]:
    """二倍ずつのホライズンでの sup の安定化判定

    trail は非減少の sup 列（H/4, H/2, H）。
    """
    a, b, c = trail
    scale = max(abs(b), 1e-300)
    last_growth = (c - b) / scale if c > b else 0.0
    first_growth = (b - a) / max(abs(a), 1e-300) if b > a else 0.0
    evidence = {"sup": c, "growth_last": last_growth, "growth_prev": first_growth}
    if c == b or last_growth <= settings.stabilization_tol:
        return "Pass", evidence
    if last_growth >= settings.divergence_growth and first_growth >= settings.divergence_growth:
        return "Fail", evidence
    return "Inconclusive", evidence


class MatrixService:
    """作用素行列の数値計算サービス"""

    def __init__(self, settings: Settings):
        self.settings = settings

    def op_norm_block(self, M: np.ndarray, ctx: NormContext = ONE_NORMS) -> float:
        """m×d ブロックの作用素ノルム"""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return float(block_op_norms(M[None], ctx)[0])

    # ---- 群ノルムの最大化 ---------------------------------------------------

    @staticmethod
    def _images(dense: np.ndarray, points: np.ndarray) -> np.ndarray:
        """各ブロックによる端点の像 (L, m, p)"""
        return np.einsum("lij,pj->lip", dense, points)

    def _greedy(self, Y: np.ndarray, ctx: NormContext) -> Tuple[float, np.ndarray]:
        """端点選択の座標上昇法"""
        L, m, p = Y.shape
        starts = [np.argmax(ctx.vector_norm(Y, axis=1), axis=1)]
        # 成分 i ごとに符号を揃えた初期値
        for i in range(m):
            starts.append(np.argmax(Y[:, i, :], axis=1))
            starts.append(np.argmin(Y[:, i, :], axis=1))
        best_value, best_choice = -1.0, starts[0]
        for choice in starts:
            choice = choice.copy()
            total = Y[np.arange(L), :, choice].sum(axis=0)
            value = float(ctx.vector_norm(total))
            for _ in range(50):
                improved = False
                for l in range(L):
                    rest = total - Y[l, :, choice[l]]
                    values = ctx.vector_norm(rest[:, None] + Y[l], axis=0)
                    j = int(np.argmax(values))
                    if values[j] > value + 1e-15:
                        choice[l] = j
                        total = rest + Y[l, :, j]
                        value = float(values[j])
                        improved = True
                if not improved:
                    break
            if value > best_value:
                best_value, best_choice = value, choice
        return best_value, best_choice

    @staticmethod
    def _enumerate(Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """ブロック列のすべての端点選択の和とその選択"""
        L, m, p = Y.shape
        sums = np.zeros((1, m))
        choices = np.zeros((1, 0), dtype=np.int64)
        for l in range(L):
            sums = (sums[:, None, :] + Y[l].T[None, :, :]).reshape(-1, m)
            choices = np.concatenate(
                [np.repeat(choices, p, axis=0), np.tile(np.arange(p), len(choices))[:, None]],
                axis=1,
            )
        return sums, choices

    def _exhaustive(self, Y: np.ndarray, ctx: NormContext) -> Tuple[float, np.ndarray]:
        L = Y.shape[0]
        half = L // 2
        left_sums, left_choices = self._enumerate(Y[:half])
        right_sums, right_choices = self._enumerate(Y[half:])
        chunk = max(1, _CHUNK_ELEMENTS // max(1, len(right_sums) * Y.shape[1]))
        best_value, best_pair = -1.0, (0, 0)
        for start in range(0, len(left_sums), chunk):
            block = left_sums[start : start + chunk]
            values = ctx.vector_norm(block[:, None, :] + right_sums[None, :, :], axis=2)
            flat = int(np.argmax(values))
            i, j = divmod(flat, values.shape[1])
            if values[i, j] > best_value:
                best_value, best_pair = float(values[i, j]), (start + i, j)
        choice = np.concatenate([left_choices[best_pair[0]], right_choices[best_pair[1]]])
        return best_value, choice

    def exhaustive_feasible(self, count: int, d: int, ctx: NormContext) -> bool:
        choices = 2 * d if ctx.domain_norm == "one" else 2**d
        return count * math.log2(choices) <= self.settings.exhaustive_log2_cap

    def maximize(
        self, row: RowSlice, ctx: NormContext = ONE_NORMS, mode: str = "auto"
    ) -> Tuple[float, np.ndarray, bool]:
        """‖Σ_k A_{n,k} x_k‖ を端点 x_k 上で最大化

        戻り値は (値, x (len(ks), d), 厳密か)。
        """
        points = extreme_points(row.d, ctx)
        xs = np.tile(points[0], (len(row.ks), 1))
        if len(row.ks) == 0:
            return 0.0, xs, True
        dense = row.dense()
        nonzero = np.flatnonzero(np.any(dense != 0, axis=(1, 2)))
        if len(nonzero) == 0:
            return 0.0, xs, True
        Y = self._images(dense[nonzero], points)
        if mode != "bounds" and self.exhaustive_feasible(len(nonzero), row.d, ctx):
            value, choice = self._exhaustive(Y, ctx)
            exact = True
        else:
            value, choice = self._greedy(Y, ctx)
            exact = False
        xs[nonzero] = points[choice]
        return value, xs, exact

    # ---- 群ノルム -----------------------------------------------------------

    def _restrict(self, A: BlockMatrix, n: int, E: DescriptorBase, horizon: int) -> RowSlice:
        row = A.row(n, horizon)
        keep = E.mask(horizon)[row.ks] if len(row.ks) else np.zeros(0, dtype=bool)
        if not keep.any() and E.count_prefix(horizon) == 0:
            reach = max(4 * horizon, 1 << 16)
            if E.count_prefix(reach) > 0:
                raise EmptyEvaluation(
                    f"ホライズン {horizon} が E={E.to_literal()} の最小元より小さいため評価できません"
                )
        return row.restrict(keep)

    def group_norm(
        self,
        A: BlockMatrix,
        n: int,
        E: DescriptorBase,
        horizon: int,
        ctx: NormContext = ONE_NORMS,
        mode: str = "auto",
    ) -> GroupNormBound:
        """群ノルム ‖A_{n,E∩[0,horizon]}‖ の上下界"""
        row = self._restrict(A, n, E, horizon)
        return self.group_norm_of_row(row, ctx, mode, nonnegative=A.nonnegative)

    def group_norm_of_row(
        self, row: RowSlice, ctx: NormContext = ONE_NORMS, mode: str = "auto", nonnegative: bool = False
    ) -> GroupNormBound:
        columns = row.ks.tolist()
        if row.m == 1 and row.d == 1 and mode != "exhaustive":
            values = row.blocks.reshape(-1)
            total = math.fsum(np.abs(values))
            signs = np.where(values < 0, -1.0, 1.0)[:, None]
            return GroupNormBound(
                lower=total,
                upper=total,
                exact=True,
                method="ScalarSum",
                maximizer=signs.tolist(),
                columns=columns,
            )
        if nonnegative and ctx.domain_norm == "sup_unit" and mode != "exhaustive":
            value = float(ctx.vector_norm(row.apply_unit()))
            return GroupNormBound(
                lower=value,
                upper=value,
                exact=True,
                method="PositiveUnit",
                maximizer=np.ones((len(columns), row.d)).tolist(),
                columns=columns,
            )
        value, xs, exact = self.maximize(row, ctx, mode)
        if exact:
            return GroupNormBound(
                lower=value,
                upper=value,
                exact=True,
                method="ExtremePointExhaustive",
                maximizer=xs.tolist(),
                columns=columns,
            )
        entry_bound = float(row.entry_abs_sums().max(initial=0.0))
        upper = math.fsum(row.op_norms(ctx))
        lower = min(max(entry_bound, value), upper)
        return GroupNormBound(
            lower=lower,
            upper=upper,
            exact=lower == upper,
            method="Sandwich",
            maximizer=xs.tolist(),
            columns=columns,
        )

    # ---- 尾部と変換 ---------------------------------------------------------

    def certified_tail(self, A: BlockMatrix, n: int, horizon: int) -> Optional[float]:
        """列 > horizon の尾部群ノルムの証明済み上界（なければ None）"""
        if A.tail_is_zero(n, horizon):
            return 0.0
        if A.tail_decay_certificate is None:
            return None
        for eps in reversed(_EPS_GRID):
            if A.tail_decay_certificate(n, eps) <= horizon + 1:
                return eps
        return None

    def tail_norm(
        self,
        A: BlockMatrix,
        n: int,
        K: int,
        horizon: int,
        ctx: NormContext = ONE_NORMS,
        mode: str = "auto",
    ) -> GroupNormBound:
        """‖A_{n,≥K}‖ の上下界。証明書があれば上界を無限の尾部へ延長"""
        if K > horizon:
            raise InsufficientHorizon(f"K={K} がホライズン {horizon} を超えています")
        bound = self.group_norm(A, n, RangeSet(lo=K, hi=horizon), horizon, ctx, mode)
        if A.row_support is not None and not A.tail_is_zero(n, horizon):
            beyond = A.row(n, None).restrict(A.row(n, None).ks > horizon)
            extra = math.fsum(beyond.op_norms(ctx))
            return bound.model_copy(update={"upper": bound.upper + extra, "exact": bound.exact and extra == 0})
        tail = self.certified_tail(A, n, horizon)
        if tail is None or tail == 0.0:
            return bound
        return bound.model_copy(update={"upper": bound.upper + tail, "exact": False})

    def transform(
        self,
        A: BlockMatrix,
        x: SequenceView,
        n: int,
        horizon: int,
        tail_tol: Optional[float] = None,
        ctx: NormContext = ONE_NORMS,
    ) -> TransformResult:
        """A_n x = Σ_k A_{n,k} x_k と打ち切り誤差の上界"""
        if x.dim != A.d:
            raise ValueError(f"系列の次元 {x.dim} が行列の定義域次元 {A.d} と一致しません")
        row = A.full_row(n, horizon)
        value = row.apply(x.sample_at(row.ks)) if len(row.ks) else np.zeros(A.m)
        sup_x = float(ctx.domain_vector_norm(x.sample(horizon), axis=1).max())
        tail = self.certified_tail(A, n, horizon)
        certified = tail is not None
        if certified:
            remainder = sup_x * tail
        else:
            # 証明書がない場合は最後の半区間の上界で代用
            recent = row.restrict(row.ks > horizon // 2)
            remainder = sup_x * math.fsum(recent.op_norms(ctx))
            logger.debug(f"行 {n} の尾部証明書がありません（推定剰余 {remainder:.3g}）")
        if tail_tol is not None and remainder > tail_tol:
            logger.warning(f"行 {n} の打ち切り誤差 {remainder:.3g} が許容値 {tail_tol:.3g} を超えています")
        return TransformResult(
            value=np.asarray(value, dtype=float).tolist(),
            remainder_bound=remainder,
            certified=certified,
            n=n,
            horizon=horizon,
        )

    def row_operator_sum(self, A: BlockMatrix, n: int, horizon: int) -> np.ndarray:
        """Σ_{k≤horizon} A_{n,k}（成分ごと）"""
        return A.full_row(n, horizon).total()

    def row_operator_sum_exact(self, A: BlockMatrix, n: int, horizon: int) -> Fraction:
        """有理数の規則を持つスカラー行列の厳密な行和"""
        if A.exact_rule is None:
            raise WorkbenchError(f"{A.name} には有理数の規則が宣言されていません")
        columns = A.columns(n, horizon)
        return sum((A.exact_rule(n, int(k)) for k in columns), Fraction(0))

    # ---- メタデータと β 双対 ------------------------------------------------

    def spot_check_metadata(self, A: BlockMatrix, horizon: int, rows: int = 8) -> Dict[str, bool]:
        """宣言されたメタデータを抜き取りで検証"""
        horizon = A.clamp_horizon(horizon)
        ns = sorted({0, 1, 2, horizon // 3, horizon // 2, horizon} | set(range(0, horizon + 1, max(1, horizon // rows))))
        result: Dict[str, bool] = {}
        sample_cols = np.arange(0, horizon + 1, max(1, horizon // 32), dtype=np.int64)
        if A.nonnegative:
            result["nonnegative"] = all(bool((A.row(n, horizon).blocks >= 0).all()) for n in ns)
        if A.rank_one is not None:
            ok = True
            for n in ns:
                row = A.row(n, horizon)
                if not len(row.ks):
                    continue
                expected = np.asarray(A.rank_one.scalar(n, row.ks), dtype=float)[:, None, None] * A.rank_one.A0
                ok &= bool(np.allclose(row.dense(), expected, atol=1e-12))
            result["rank_one"] = ok
        if A.column_finite_bound is not None and A.row_support is None:
            ok = True
            for n in ns:
                bound = A.column_finite_bound(n)
                beyond = np.arange(bound + 1, bound + 9, dtype=np.int64)
                ok &= not np.any(A.evaluate(n, beyond))
            result["column_finite_bound"] = ok
        if A.row_support is not None:
            ok = True
            for n in ns:
                support = set(np.asarray(A.row_support(n)).tolist())
                off = np.array([k for k in sample_cols.tolist() if k not in support], dtype=np.int64)
                ok &= not np.any(A.evaluate(n, off))
            result["row_support"] = ok
        logger.debug(f"メタデータ検査 {A.name}: {result}")
        return result

    def beta_dual(
        self, A: BlockMatrix, n: int, horizon: int, ctx: NormContext = ONE_NORMS
    ) -> List[ConditionVerdict]:
        """行 n の級数 Σ_k A_{n,k}x_k の収束条件（N2, N3, N2′）"""
        row = A.full_row(n, horizon)
        norms = row.op_norms(ctx)
        abs_sums = row.abs_sums()
        cuts = [horizon // 4, horizon // 2, horizon]
        trail = [math.fsum(norms[row.ks <= c]) for c in cuts]
        abs_trail = [math.fsum(abs_sums[row.ks <= c]) for c in cuts]
        tail_trail = [math.fsum(norms[row.ks > c]) for c in cuts]
        n2_status, n2_evidence = growth_verdict(trail, self.settings)
        n2p_status, n2p_evidence = growth_verdict(abs_trail, self.settings)
        if A.tail_is_zero(n, horizon):
            # 台が有限と宣言された行の和は有限
            n2_status = n2p_status = "Pass"
        certified = self.certified_tail(A, n, horizon)
        if certified is not None and certified <= self.settings.stabilization_tol:
            n3_status = "Pass"
        elif tail_trail[1] > 0 and tail_trail[1] >= self.settings.persist_ratio * tail_trail[0]:
            n3_status = "Fail" if tail_trail[1] > self.settings.fail_floor else "Inconclusive"
        elif tail_trail[0] <= self.settings.limit_tol or tail_trail[1] <= self.settings.vanish_ratio * tail_trail[0]:
            n3_status = "Pass"
        else:
            n3_status = "Inconclusive"
        return [
            ConditionVerdict(id="N2", status=n2_status, evidence={**n2_evidence, "row": n, "trail": trail}, horizon=horizon),
            ConditionVerdict(
                id="N3",
                status=n3_status,
                evidence={"row": n, "tail_trail": tail_trail, "certified_tail": certified},
                horizon=horizon,
            ),
            ConditionVerdict(id="N2′", status=n2p_status, evidence={**n2p_evidence, "row": n, "trail": abs_trail}, horizon=horizon),
        ]


def load_matrix_file(path: str) -> BlockMatrix:
    """行列仕様ファイル（JSON）を読み込む

    形式: {"kind": 組み込みリテラル | "custom", "dims": {"d", "m"},
    "prefix": [n][k][i][j], "nonnegative": bool, "rank_one": {"A0": [[...]]}}
    """
    from src.services.zoo import builtin_matrix

    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise LiteralParseError(f"行列仕様ファイルを読み込めません: {path}: {e}")
    kind = spec.get("kind")
    if kind != "custom":
        if not kind:
            raise LiteralParseError(f"行列仕様ファイルに kind がありません: {path}")
        return builtin_matrix(kind).matrix
    dims = spec.get("dims", {})
    prefix = np.asarray(spec.get("prefix", []), dtype=float)
    d, m = int(dims.get("d", 1)), int(dims.get("m", 1))
    if prefix.ndim != 4 or prefix.shape[2:] != (m, d):
        raise LiteralParseError(f"prefix の形 {prefix.shape} が dims (m={m}, d={d}) と一致しません")
    rows, cols = prefix.shape[:2]

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ks), m, d))
        if n < rows:
            inside = ks < cols
            out[inside] = prefix[n, ks[inside]]
        return out

    rank_one = None
    if "rank_one" in spec:
        A0 = np.asarray(spec["rank_one"]["A0"], dtype=float).reshape(m, d)
        i, j = np.unravel_index(np.argmax(np.abs(A0)), A0.shape)

        def scalar(n: int, ks: np.ndarray) -> np.ndarray:
            return rule(n, ks)[:, i, j] / A0[i, j]

        rank_one = RankOne(scalar=scalar, A0=A0)
    return BlockMatrix(
        d,
        m,
        rule,
        name=Path(path).stem,
        column_finite_bound=lambda n: cols - 1,
        nonnegative=bool(spec.get("nonnegative", False)),
        rank_one=rank_one,
        row_horizon=rows - 1,
    )
