"""条件族の判定と定理レベルの正則性判定

各チェッカーは `RowScan`（行 0..N を一度だけ走査した集計）から条件を判定する。
「sup < ∞」は倍々ホライズンでの安定化、「𝒥-lim = 0」は三点トレイルで判定し、
E ∈ ℐ や系列空間についての全称条件はサンプル上でのみ検証して
quantifier="sampled" を付ける。
"""

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import Settings
from src.models.descriptors import DescriptorBase, IdealSpec
from src.models.errors import InsufficientHorizon, NotRankOne, RejectedSample, UnsupportedIdeal
from src.models.matrices import ONE_NORMS, BlockMatrix, NormContext
from src.models.schemas import BehavioralSummary, ConditionVerdict, RegularityReport, RowDiagnostics
from src.models.sequences import SequenceView
from src.services.ideal_core import IdealService, TrailVerdict
from src.services.operator_matrix import MatrixService, growth_verdict
from src.services.zoo import FamilyBuilder, NamedFamily

logger = logging.getLogger(__name__)

FIN = IdealSpec(kind="fin")

# ASCII 表記の条件名
CONDITION_ALIASES = {
    "S3s": "S3♯",
    "T1b": "T1♭",
    "T1bb": "T1♭♭",
    "T2b": "T2♭",
    "T3n": "T3♮",
    "T3s": "T3♯",
    "T4b": "T4♭",
    "T5p": "T5′",
    "T5s": "T5♯",
    "T6b": "T6♭",
    "F6p": "F6′",
    "N2p": "N2′",
}

T_CONDITIONS = (
    "T1", "T1♭", "T1♭♭", "T2", "T2♭", "T3", "T3♮", "T3♯", "T4", "T4♭", "T5", "T5′", "T5♯", "T6", "T6♭",
)  # fmt: skip

# T5 系で x_k に使う有界なパターン
_BOUNDED_PATTERNS = ("ones", "alternating", "unit", "alternating_unit")
_PATTERNS = _BOUNDED_PATTERNS + ("ramp",)


def normalize_condition_id(cid: str) -> str:
    cid = cid.strip()
    return CONDITION_ALIASES.get(cid, cid)


def combine_status(statuses: Sequence[str]) -> str:
    """Fail が一つでもあれば Fail、すべて Pass なら Pass"""
    if any(s == "Fail" for s in statuses):
        return "Fail"
    if all(s == "Pass" for s in statuses):
        return "Pass"
    return "Inconclusive"


_STATUS_RANK = {"Pass": 0, "Inconclusive": 1, "Fail": 2}


def _level_maxima(values: np.ndarray, index: np.ndarray, p: int, size: int) -> np.ndarray:
    """行 0..p について、生成番号ごとの values の最大（値は非負）"""
    out = np.zeros(size)
    np.maximum.at(out, index[: p + 1], values[: p + 1])
    return out


def _sup_off_levels(per_level: np.ndarray) -> np.ndarray:
    """t ごとの sup_{index > t}（Q_t の補集合上の最大）"""
    suffix = np.maximum.accumulate(per_level[::-1])[::-1]
    return np.append(suffix[1:], 0.0)


def _pattern(name: str, ks: np.ndarray, direction: np.ndarray) -> np.ndarray:
    if name in ("ones", "unit"):
        scale = np.ones(len(ks))
    elif name in ("alternating", "alternating_unit"):
        scale = np.where(ks % 2 == 0, 1.0, -1.0)
    else:
        scale = ks + 1.0
    return scale[:, None] * direction[None, :]


def _directions(d: int, ctx: NormContext) -> Dict[str, np.ndarray]:
    e0 = np.zeros(d)
    e0[0] = 1.0
    ones = np.ones(d)
    unit = ones / float(ctx.domain_vector_norm(ones))
    return {"ones": e0, "alternating": e0, "ramp": e0, "unit": unit, "alternating_unit": unit}


def _direction_vectors(d: int, count: int, ctx: NormContext) -> np.ndarray:
    """座標ベクトル e_j（j < count）と正規化した幾何ベクトル"""
    vectors = [np.eye(d)[j] for j in range(min(d, count))]
    geometric = np.exp2(-np.arange(d, dtype=float))
    vectors.append(geometric / float(ctx.domain_vector_norm(geometric)))
    return np.array(vectors)


@dataclass
class MaskStats:
    """Σ_{k∈E} に関する行ごとの集計"""

    literal: str
    upper: np.ndarray
    lower: np.ndarray
    abs: np.ndarray
    column_sums: np.ndarray
    applied: Dict[str, np.ndarray]


@dataclass
class RowScan:
    """行 0..rows、列 ≤ horizon の一回走査で得た集計"""

    rows: int
    horizon: int
    cuts: np.ndarray
    tail_upper: np.ndarray
    tail_lower: np.ndarray
    abs_cuts: np.ndarray
    totals: np.ndarray
    abs_totals: np.ndarray
    column_norms: np.ndarray
    direction_norms: np.ndarray
    last_nonzero: np.ndarray
    open_tail: np.ndarray
    uncertified: np.ndarray
    masks: Dict[str, MaskStats] = field(default_factory=dict)

    @property
    def prefixes(self) -> List[int]:
        N = self.rows
        return [N // 4, N // 2, N]

    def sup_trail(self, values: np.ndarray) -> List[float]:
        return [float(values[: p + 1].max()) for p in self.prefixes]

    def cut_index(self, k0: int) -> int:
        return int(np.searchsorted(self.cuts, k0))


@dataclass(frozen=True)
class TheoremMode:
    name: str
    required: Tuple[str, ...]
    hypotheses: Tuple[str, ...] = ()
    description: str = ""
    behavioral: bool = True


THEOREM_MODES: Dict[str, TheoremMode] = {
    mode.name: mode
    for mode in (
        TheoremMode("silverman_toeplitz", ("S1", "S2", "S3"), description="スカラー行列の Silverman–Toeplitz 条件"),
        TheoremMode("fin_fin", ("S1", "S2", "S3"), description="ℐ = 𝒥 = Fin での作用素版 Silverman–Toeplitz 条件"),
        TheoremMode("general", ("T1", "T2", "T3", "T4", "T5"), description="一般の (ℐ, 𝒥)-正則性の特徴付け"),
        TheoremMode(
            "countably_generated",
            ("T1", "T4", "T6"),
            ("T3♮", "T6♭"),
            description="𝒥 が可算生成のときの特徴付け（T3♮, T6♭ を仮定）",
        ),
        TheoremMode(
            "positive_order_unit",
            ("T1", "T4", "T6"),
            ("T3♮",),
            description="順序単位を持つ AM 空間上の正作用素（k₀ = 0）",
        ),
        TheoremMode("finite_dimensional", ("F1", "F4", "F6"), description="有限次元の成分条件"),
        TheoremMode(
            "null_from_bounded", ("F1", "F6′"), description="(ℓ∞, c₀ᵇ(𝒥)) への所属", behavioral=False
        ),
        TheoremMode("generated_unbounded", ("R1", "R2", "R4", "R6"), description="可算生成 𝒥 での (c(ℐ), c(𝒥)) 正則性"),
        TheoremMode("rank_one", ("M0", "M1", "M4", "M6"), description="各 A_{n,k} が A₀ の倍数の場合"),
        TheoremMode("tall_to_null", ("B1", "B2", "B3"), description="tall な ℐ での (c(ℐ), c₀ᵇ(𝒥)) への所属", behavioral=False),
        TheoremMode("selective_bounded", ("T1♭", "T3", "T4", "T5"), description="(cᵇ(ℐ), c(𝒥)) 正則性"),
        TheoremMode("selective_unbounded", ("T1♭", "T3♯", "T4", "T5♯"), description="(c(ℐ), c(𝒥)) 正則性"),
        TheoremMode("bounded_to_bounded", ("T1♭", "T2♭", "T3♮"), description="(ℓ∞, ℓ∞(𝒥)) への所属", behavioral=False),
        TheoremMode("convergent_to_bounded", ("T1♭", "T2♭", "T4♭"), description="(c, ℓ∞(𝒥)) への所属", behavioral=False),
    )
}

# 有限次元では不成立なら正則でない仮定
_NECESSARY_HYPOTHESES = {"T6♭"}


@dataclass(frozen=True)
class Implication:
    target: str
    premises: Tuple[str, ...]
    text: str
    applies: Callable[[BlockMatrix, IdealSpec, IdealSpec], bool]


IMPLICATIONS: Tuple[Implication, ...] = (
    Implication("T3♮", ("T1",), "dim X < ∞: T1 ⇒ T3♮", lambda A, I, J: True),
    Implication("T3", ("T1", "T4"), "ℐ = Fin: T1 ∧ T4 ⇒ T3", lambda A, I, J: I.kind == "fin"),
    Implication("T3", ("T1", "T3♮"), "T1 ∧ T3♮ ⇒ T3", lambda A, I, J: True),
    Implication("T5", ("T6",), "T6 ⇒ T5", lambda A, I, J: True),
    Implication("T2", ("T5",), "𝒥 = Fin: T5 ⇒ T2", lambda A, I, J: J.kind == "fin"),
)


class ConditionService:
    """条件チェッカーと正則性判定のサービス"""

    def __init__(self, settings: Settings):
        self.settings = settings
        self.ideal_service = IdealService(settings)
        self.matrix_service = MatrixService(settings)
        self._scans: "OrderedDict[tuple, Tuple[BlockMatrix, RowScan]]" = OrderedDict()
        self._scalars: Dict[int, Tuple[BlockMatrix, BlockMatrix]] = {}
        self._lock = threading.Lock()

    # ---- 走査 ---------------------------------------------------------------

    def _cut_candidates(self, H: int) -> np.ndarray:
        cuts = set(range(0, min(8, H) + 1))
        c = 16
        while c <= H // 4:
            cuts.add(c)
            c *= 2
        return np.array(sorted(cuts), dtype=np.int64)

    def scan(
        self,
        A: BlockMatrix,
        horizon: int,
        ctx: NormContext = ONE_NORMS,
        masks: Sequence[DescriptorBase] = (),
    ) -> RowScan:
        """行 0..N（N は切断行列の有効行まで）を一度だけ評価して集計する"""
        literals = tuple(sorted({E.to_literal() for E in masks}))
        key = (id(A), horizon, ctx.domain_norm, ctx.codomain_norm, literals)
        with self._lock:
            cached = self._scans.get(key)
            if cached is not None and cached[0] is A:
                self._scans.move_to_end(key)
                return cached[1]
        by_literal = {E.to_literal(): E for E in masks}
        result = self._scan(A, horizon, ctx, [by_literal[lit] for lit in literals])
        with self._lock:
            self._scans[key] = (A, result)
            while len(self._scans) > 8:
                self._scans.popitem(last=False)
        return result

    def _scan(self, A: BlockMatrix, H: int, ctx: NormContext, masks: List[DescriptorBase]) -> RowScan:
        N = A.clamp_horizon(H)
        if N < 8:
            raise InsufficientHorizon(f"{A.name} の有効な行が {N} 行しかないため判定できません（8 行以上が必要）")
        logger.info(f"行走査を開始します: {A.name} (行 ≤ {N}, 列 ≤ {H})")
        cuts = self._cut_candidates(H)
        column_cuts = np.array([H // 4, H // 2, H], dtype=np.int64)
        K = min(self.settings.columns_checked, H + 1)
        directions = _direction_vectors(A.d, self.settings.direction_count, ctx)
        pattern_directions = _directions(A.d, ctx)
        P = len(directions)

        tail_upper = np.zeros((N + 1, len(cuts)))
        tail_lower = np.zeros((N + 1, len(cuts)))
        abs_cuts = np.zeros((N + 1, 3))
        totals = np.zeros((N + 1, A.m, A.d))
        abs_totals = np.zeros(N + 1)
        column_norms = np.zeros((N + 1, K))
        direction_norms = np.zeros((N + 1, K, P))
        last_nonzero = np.full(N + 1, -1, dtype=np.int64)
        open_tail = np.zeros(N + 1, dtype=bool)
        uncertified = np.zeros(N + 1, dtype=bool)
        stats = {
            E.to_literal(): MaskStats(
                E.to_literal(),
                np.zeros(N + 1),
                np.zeros(N + 1),
                np.zeros(N + 1),
                np.zeros(N + 1),
                {p: np.zeros(N + 1) for p in _PATTERNS},
            )
            for E in masks
        }
        mask_cache: Dict[str, np.ndarray] = {}

        def membership(E: DescriptorBase, ks: np.ndarray) -> np.ndarray:
            literal = E.to_literal()
            top = int(ks.max()) if len(ks) else 0
            cached = mask_cache.get(literal)
            if cached is None or len(cached) <= top:
                cached = E.mask(max(top, 2 * H))
                mask_cache[literal] = cached
            return cached[ks]

        for n in range(N + 1):
            row = A.full_row(n, H)
            if len(row.ks) > 1 and np.any(np.diff(row.ks) <= 0):
                row = row.restrict(np.argsort(row.ks, kind="stable"))
            ks = row.ks
            norms = row.op_norms(ctx)
            abs_sums = row.abs_sums()
            entries = np.abs(row.blocks).reshape(len(ks), -1) if len(ks) else np.zeros((0, 1))
            beyond = 0.0
            open_tail[n] = not A.tail_is_zero(n, H)
            if A.row_support is None and open_tail[n]:
                certified = self.matrix_service.certified_tail(A, n, H)
                if certified is None:
                    uncertified[n] = True
                else:
                    beyond = certified

            suffix = np.concatenate([np.cumsum(norms[::-1])[::-1], [0.0]])
            entry_suffix = np.concatenate(
                [np.cumsum(entries[::-1], axis=0)[::-1], np.zeros((1, entries.shape[1]))], axis=0
            )
            pos = np.searchsorted(ks, cuts)
            tail_upper[n] = suffix[pos] + beyond
            tail_lower[n] = entry_suffix[pos].max(axis=1, initial=0.0)

            prefix_abs = np.concatenate([[0.0], np.cumsum(abs_sums)])
            upto = np.searchsorted(ks, column_cuts, side="right")
            abs_cuts[n] = prefix_abs[upto]
            if A.row_support is not None:
                # 宣言された台は有限なので最後の切れ目は行全体
                abs_cuts[n, -1] = prefix_abs[-1]

            totals[n] = row.total()
            abs_totals[n] = math.fsum(abs_sums)
            nonzero = np.any(entries != 0, axis=1) & (ks <= H)
            if nonzero.any():
                last_nonzero[n] = int(ks[nonzero].max())

            cols = np.arange(K)
            idx = np.searchsorted(ks, cols)
            present = np.zeros(K, dtype=bool)
            if len(ks):
                present = (idx < len(ks)) & (ks[np.minimum(idx, len(ks) - 1)] == cols)
            if present.any():
                tracked = row.restrict(idx[present])
                column_norms[n, present] = norms[idx[present]]
                dense = tracked.dense()
                images = np.einsum("kij,pj->kpi", dense, directions)
                direction_norms[n, present] = ctx.vector_norm(images, axis=2)

            for E in masks:
                s = stats[E.to_literal()]
                keep = membership(E, ks) if len(ks) else np.zeros(0, dtype=bool)
                if not keep.any():
                    continue
                sub = row.restrict(keep)
                s.upper[n] = math.fsum(norms[keep])
                s.lower[n] = float(entries[keep].sum(axis=0).max(initial=0.0))
                s.abs[n] = math.fsum(abs_sums[keep])
                if sub.diagonal:
                    s.column_sums[n] = float(np.abs(sub.blocks).sum())
                else:
                    s.column_sums[n] = float(ctx.vector_norm(sub.blocks, axis=1).sum())
                for p in _PATTERNS:
                    s.applied[p][n] = float(ctx.vector_norm(sub.apply(_pattern(p, sub.ks, pattern_directions[p]))))

        logger.info(f"行走査が完了しました: {A.name}")
        return RowScan(
            rows=N,
            horizon=H,
            cuts=cuts,
            tail_upper=tail_upper,
            tail_lower=tail_lower,
            abs_cuts=abs_cuts,
            totals=totals,
            abs_totals=abs_totals,
            column_norms=column_norms,
            direction_norms=direction_norms,
            last_nonzero=last_nonzero,
            open_tail=open_tail,
            uncertified=uncertified,
            masks=stats,
        )

    def sample_rows(self, N: int) -> List[int]:
        count = max(2, self.settings.sample_rows)
        return sorted({int(round(v)) for v in np.linspace(0, N, count)})

    # ---- 共通の部品 ---------------------------------------------------------

    @staticmethod
    def _target(A: BlockMatrix, T: Any) -> np.ndarray:
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape != (A.m, A.d):
            raise ValueError(f"目標作用素の形 {T.shape} が ({A.m}, {A.d}) と一致しません")
        return T

    @staticmethod
    def _verdict(
        cid: str,
        status: str,
        horizon: int,
        evidence: Optional[Dict[str, Any]] = None,
        quantifier: str = "exact",
        bindings: Optional[Dict[str, Any]] = None,
    ) -> ConditionVerdict:
        return ConditionVerdict(
            id=cid,
            status=status,
            evidence=evidence or {},
            horizon=horizon,
            quantifier=quantifier,
            bindings=bindings or {},
        )

    def _trail(self, ideal: IdealSpec, values: np.ndarray, tol: Optional[float]) -> TrailVerdict:
        return self.ideal_service.vanishing_trail(ideal, values, tol)

    def _vanishing(
        self, cid: str, ideal: IdealSpec, values: np.ndarray, scan: RowScan, tol: Optional[float], **extra: Any
    ) -> ConditionVerdict:
        tv = self._trail(ideal, values, tol)
        evidence: Dict[str, Any] = {**tv.evidence, **extra}
        if tv.witness is not None:
            evidence["witness_row"] = tv.witness
        return self._verdict(cid, tv.status, scan.horizon, evidence)

    def _tail_bound(self, cid: str, scan: RowScan, fixed_k0: Optional[int] = None) -> ConditionVerdict:
        """sup_n ‖A_{n,≥k₀}‖ < ∞ となる k₀ を候補から探す"""
        candidates = range(len(scan.cuts)) if fixed_k0 is None else [scan.cut_index(fixed_k0)]
        best: Optional[Tuple[float, int, Dict[str, float], List[float]]] = None
        lower_fail = True
        for c in candidates:
            trail = scan.sup_trail(scan.tail_upper[:, c])
            status, evidence = growth_verdict(trail, self.settings)
            if status == "Pass":
                return self._verdict(
                    cid,
                    "Pass",
                    scan.horizon,
                    {**evidence, "trail": trail, "uncertified_rows": int(scan.uncertified.sum())},
                    bindings={"k0": int(scan.cuts[c])},
                )
            if best is None or trail[-1] < best[0]:
                best = (trail[-1], c, evidence, trail)
            lower_status, _ = growth_verdict(scan.sup_trail(scan.tail_lower[:, c]), self.settings)
            lower_fail &= lower_status == "Fail"
        _, c, evidence, trail = best
        if lower_fail:
            lower = scan.tail_lower[:, c]
            witness = int(np.argmax(lower))
            return self._verdict(
                cid,
                "Fail",
                scan.horizon,
                {**evidence, "trail": trail, "witness_row": witness, "witness_value": float(lower[witness])},
                bindings={"k0": int(scan.cuts[c])},
            )
        return self._verdict(cid, "Inconclusive", scan.horizon, {**evidence, "trail": trail}, bindings={"k0": int(scan.cuts[c])})

    def _tail_bound_ideal(self, cid: str, J: IdealSpec, scan: RowScan, fixed_k0: Optional[int] = None) -> ConditionVerdict:
        """𝒥-limsup_n ‖A_{n,≥k₀}‖ < ∞ となる k₀ を探す（f(n) = 0）"""
        candidates = range(len(scan.cuts)) if fixed_k0 is None else [scan.cut_index(fixed_k0)]
        lower_fail = True
        last: Dict[str, Any] = {}
        for c in candidates:
            report = self.ideal_service.limsup_of(J, scan.tail_upper[:, c])
            trail = [t[0] for t in report.trail]
            trail = trail if len(trail) == 3 else trail * 3
            status, evidence = growth_verdict(trail, self.settings)
            if status == "Pass":
                return self._verdict(
                    cid,
                    "Pass",
                    scan.horizon,
                    {**evidence, "limsup_trail": trail},
                    bindings={"k0": int(scan.cuts[c]), "f": 0},
                )
            lower = self.ideal_service.limsup_of(J, scan.tail_lower[:, c])
            lower_trail = [t[0] for t in lower.trail]
            lower_status, _ = growth_verdict(lower_trail if len(lower_trail) == 3 else lower_trail * 3, self.settings)
            lower_fail &= lower_status == "Fail"
            last = {**evidence, "limsup_trail": trail, "k0": int(scan.cuts[c])}
        if lower_fail:
            values = scan.tail_lower[:, candidates[-1]]
            witness = int(np.argmax(values))
            return self._verdict(
                cid, "Fail", scan.horizon, {**last, "witness_row": witness, "witness_value": float(values[witness])}
            )
        return self._verdict(cid, "Inconclusive", scan.horizon, last)

    def _k0(self, scan: RowScan, fixed_k0: Optional[int]) -> int:
        if fixed_k0 is not None:
            return fixed_k0
        return int(self._tail_bound("T1", scan).bindings.get("k0", 0))

    def _row_sum_deviation(self, scan: RowScan, T: np.ndarray) -> np.ndarray:
        return np.abs(scan.totals - T[None]).reshape(scan.rows + 1, -1).max(axis=1)

    def _columns_vanish(self, cid: str, ideal: IdealSpec, values: np.ndarray, scan: RowScan, tol: Optional[float]) -> ConditionVerdict:
        """列 k ごとの 𝒥-lim_n values[n, k] = 0"""
        statuses, trails = [], {}
        witness: Optional[Dict[str, Any]] = None
        for k in range(values.shape[1]):
            tv = self._trail(ideal, values[:, k], tol)
            statuses.append(tv.status)
            trails[str(k)] = tv.trail
            if tv.status == "Fail" and witness is None:
                witness = {"witness_column": k, "witness_row": tv.witness, "witness_value": float(values[tv.witness, k])}
        evidence: Dict[str, Any] = {"column_trails": trails, "columns": values.shape[1]}
        if witness:
            evidence.update(witness)
        quantifier = "sampled" if values.shape[1] < scan.horizon + 1 else "exact"
        return self._verdict(cid, combine_status(statuses), scan.horizon, evidence, quantifier)

    # ---- S: Fin–Fin ---------------------------------------------------------

    def check_S(
        self,
        A: BlockMatrix,
        T: Any,
        horizon: int,
        tol: Optional[float] = None,
        sharp: bool = False,
        ctx: NormContext = ONE_NORMS,
        fixed_k0: Optional[int] = None,
    ) -> List[ConditionVerdict]:
        """S1–S3（sharp=True なら S3♯ も）"""
        T = self._target(A, T)
        scan = self.scan(A, horizon, ctx)
        verdicts = [
            self._tail_bound("S1", scan, fixed_k0),
            self._vanishing("S2", FIN, self._row_sum_deviation(scan, T), scan, tol),
            self._columns_vanish("S3", FIN, scan.direction_norms.max(axis=2), scan, tol),
        ]
        if sharp:
            verdicts.append(self._columns_vanish("S3♯", FIN, scan.column_norms, scan, tol))
        return verdicts

    # ---- T: 一般の条件 ------------------------------------------------------

    def default_samples(self, I: IdealSpec) -> List[DescriptorBase]:
        """ℐ の標準サンプル（生成集合を含む）"""
        suite = self.settings.sample_suite(I.kind)
        samples = list(suite.e_samples)
        if I.countably_generated:
            samples += [I.generator(t) for t in range(2)]
        seen, out = set(), []
        for E in samples:
            if E.to_literal() not in seen:
                seen.add(E.to_literal())
                out.append(E)
        return out

    def _validated_samples(self, I: IdealSpec, E_samples: Optional[Sequence[DescriptorBase]]) -> List[DescriptorBase]:
        samples = list(E_samples) if E_samples else []
        for E in samples:
            status = self.ideal_service.ideal_member(I, E).status
            if status != "In":
                raise RejectedSample(f"サンプル {E.to_literal()} は {I.to_literal()} への所属が確認できません（{status}）")
        known = {E.to_literal() for E in samples}
        return samples + [E for E in self.default_samples(I) if E.to_literal() not in known]

    @staticmethod
    def _validated_sequences(
        I: IdealSpec, x_samples: Optional[Sequence[SequenceView]], spaces: Sequence[str]
    ) -> Dict[str, List[SequenceView]]:
        used: Dict[str, List[SequenceView]] = {space: [] for space in spaces}
        for x in x_samples or []:
            matched = [space for space in spaces if x.declares(space, I)]
            if spaces and not matched:
                raise RejectedSample(
                    f"系列 {x.name or '(無名)'} は {', '.join(spaces)}（{I.to_literal()}）への所属を宣言していません"
                )
            for space in matched:
                used[space].append(x)
        return used

    def _transform_norms(self, A: BlockMatrix, x: SequenceView, N: int, H: int, ctx: NormContext) -> np.ndarray:
        if x.dim != A.d:
            raise RejectedSample(f"系列 {x.name} の次元 {x.dim} が行列の定義域次元 {A.d} と一致しません")
        out = np.zeros(N + 1)
        for n in range(N + 1):
            row = A.full_row(n, H)
            if len(row.ks):
                out[n] = float(ctx.vector_norm(row.apply(x.sample_at(row.ks))))
        return out

    def _supported_null(
        self,
        cid: str,
        J: IdealSpec,
        scan: RowScan,
        patterns: Sequence[str],
        sequences: Dict[str, np.ndarray],
        tol: Optional[float],
        bounded: bool = False,
    ) -> ConditionVerdict:
        """台が E ∈ ℐ の系列 x について 𝒥-lim A x = 0（bounded なら sup < ∞ も）"""
        statuses: List[str] = []
        checked: Dict[str, List[float]] = {}
        witness: Optional[Dict[str, Any]] = None
        cases = [(f"{lit}:{p}", stat.applied[p]) for lit, stat in scan.masks.items() for p in patterns]
        cases += list(sequences.items())
        for label, values in cases:
            tv = self._trail(J, values, tol)
            status = tv.status
            if bounded and status != "Fail":
                growth, _ = growth_verdict(scan.sup_trail(values), self.settings)
                status = combine_status([status, growth])
            statuses.append(status)
            checked[label] = tv.trail
            if status == "Fail" and witness is None:
                row = tv.witness if tv.witness is not None else int(np.argmax(values))
                witness = {"witness": label, "witness_row": row, "witness_value": float(values[row])}
        evidence: Dict[str, Any] = {"cases": checked}
        if witness:
            evidence.update(witness)
        return self._verdict(cid, combine_status(statuses), scan.horizon, evidence, "sampled")

    def _beta_rows(self, A: BlockMatrix, scan: RowScan, ctx: NormContext, index: int) -> Tuple[str, Dict[str, Any]]:
        """抜き取り行での β 双対判定（0: N2, 1: N3, 2: N2′）"""
        statuses, failing = [], None
        for n in self.sample_rows(scan.rows):
            verdict = self.matrix_service.beta_dual(A, n, scan.horizon, ctx)[index]
            statuses.append(verdict.status)
            if verdict.status == "Fail" and failing is None:
                failing = n
        evidence: Dict[str, Any] = {"rows": self.sample_rows(scan.rows)}
        if failing is not None:
            evidence["witness_row"] = failing
        return combine_status(statuses), evidence

    def _partial_sums_stable(
        self, A: BlockMatrix, xs: List[SequenceView], scan: RowScan, ctx: NormContext
    ) -> Tuple[str, Dict[str, Any]]:
        """サンプル系列の部分和 Σ_{k≤c} A_{n,k}x_k が列の切れ目で安定するか"""
        H = scan.horizon
        cuts = [H // 4, H // 2, H]
        statuses: List[str] = []
        worst = 0.0
        for x in xs:
            for n in self.sample_rows(scan.rows):
                row = A.row(n, H)
                if not len(row.ks) or not scan.open_tail[n]:
                    continue
                values = x.sample_at(row.ks)
                if row.diagonal:
                    terms = row.blocks * values
                else:
                    terms = np.einsum("kij,kj->ki", row.blocks, values)
                partial = np.concatenate([np.zeros((1, terms.shape[1])), np.cumsum(terms, axis=0)])
                at = [partial[int(np.searchsorted(row.ks, c, side="right"))] for c in cuts]
                jump = float(ctx.vector_norm(at[2] - at[1]))
                scale = max(1.0, float(ctx.vector_norm(at[2])))
                worst = max(worst, jump / scale)
                statuses.append("Pass" if jump <= self.settings.stabilization_tol * scale else "Inconclusive")
        return combine_status(statuses) if statuses else "Pass", {"max_relative_jump": worst, "sequences": len(xs)}

    def check_T(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        horizon: int,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
        x_samples: Optional[Sequence[SequenceView]] = None,
        ids: Sequence[str] = ("T1", "T2", "T3", "T4", "T5"),
        ctx: NormContext = ONE_NORMS,
        fixed_k0: Optional[int] = None,
    ) -> List[ConditionVerdict]:
        """T 系の条件を ids の順に判定"""
        T = self._target(A, T)
        ids = [normalize_condition_id(c) for c in ids]
        unknown = [c for c in ids if c not in T_CONDITIONS]
        if unknown:
            raise ValueError(f"未知の条件です: {unknown}")
        spaces_needed = {"T3": "c_b", "T5": "c00_b", "T5′": "c00_b", "T3♯": "c", "T5♯": "c00"}
        spaces = sorted({spaces_needed[c] for c in ids if c in spaces_needed})
        sequences = self._validated_sequences(I, x_samples, spaces)
        samples = self._validated_samples(I, E_samples)
        scan = self.scan(A, horizon, ctx, samples)
        N, H = scan.rows, scan.horizon
        k0 = None
        out: List[ConditionVerdict] = []
        for cid in ids:
            if cid == "T1":
                verdict = self._tail_bound("T1", scan, fixed_k0)
            elif cid == "T1♭":
                verdict = self._tail_bound_ideal("T1♭", J, scan, fixed_k0)
            elif cid == "T1♭♭":
                status, evidence = self._beta_rows(A, scan, ctx, 0)
                verdict = self._verdict("T1♭♭", status, H, evidence, "sampled", {"f": 0})
            elif cid in ("T2", "T2♭"):
                k0 = self._k0(scan, fixed_k0) if k0 is None else k0
                verdict = self._bounded_columns(cid, J if cid == "T2♭" else None, scan, k0)
            elif cid == "T3":
                status, evidence = self._beta_rows(A, scan, ctx, 0)
                partial_status, partial = self._partial_sums_stable(A, sequences.get("c_b", []), scan, ctx)
                if status != "Fail":
                    status = combine_status([status, partial_status])
                verdict = self._verdict("T3", status, H, {**evidence, **partial}, "sampled")
            elif cid == "T3♮":
                status, evidence = self._beta_rows(A, scan, ctx, 1)
                verdict = self._verdict("T3♮", status, H, evidence, "sampled")
            elif cid == "T3♯":
                verdict = self._row_finite(A, I, scan, ctx)
            elif cid == "T4":
                verdict = self._vanishing("T4", J, self._row_sum_deviation(scan, T), scan, tol)
            elif cid == "T4♭":
                verdict = self._operator_series(A, scan)
            elif cid in ("T5", "T5′", "T5♯"):
                space = spaces_needed[cid]
                values = {
                    f"x:{x.name or i}": self._transform_norms(A, x, N, H, ctx) for i, x in enumerate(sequences.get(space, []))
                }
                patterns = _PATTERNS if cid == "T5♯" else _BOUNDED_PATTERNS
                verdict = self._supported_null(cid, J, scan, patterns, values, tol, bounded=cid == "T5′")
            elif cid == "T6":
                verdict = self._group_null("T6", J, scan, tol)
            else:
                verdict = self._columns_vanish("T6♭", J, scan.column_norms, scan, tol)
            out.append(verdict)
        return out

    def _bounded_columns(self, cid: str, J: Optional[IdealSpec], scan: RowScan, k0: int) -> ConditionVerdict:
        """k < k₀ の列について sup_n（または 𝒥-limsup_n）‖A_{n,k}x‖ < ∞"""
        if k0 == 0:
            return self._verdict(cid, "Pass", scan.horizon, {"void": True}, bindings={"k0": 0})
        K = min(k0, scan.direction_norms.shape[1])
        statuses, witness = [], None
        for k in range(K):
            for p in range(scan.direction_norms.shape[2]):
                values = scan.direction_norms[:, k, p]
                if J is None:
                    trail = scan.sup_trail(values)
                else:
                    trail = [t[0] for t in self.ideal_service.limsup_of(J, values).trail]
                status, _ = growth_verdict(trail if len(trail) == 3 else trail * 3, self.settings)
                statuses.append(status)
                if status == "Fail" and witness is None:
                    witness = {"witness_column": k, "witness_direction": p, "witness_row": int(np.argmax(values))}
        quantifier = "sampled" if K < k0 else "exact"
        return self._verdict(cid, combine_status(statuses), scan.horizon, witness or {}, quantifier, {"k0": k0})

    def _row_finite(self, A: BlockMatrix, I: IdealSpec, scan: RowScan, ctx: NormContext) -> ConditionVerdict:
        """T3♯: ℐ = Fin なら T3 と同じ。tall な ℐ では行有限性が必要"""
        status, evidence = self._beta_rows(A, scan, ctx, 0)
        rows = self.sample_rows(scan.rows)
        H = scan.horizon
        if I.kind == "fin" or status == "Fail":
            return self._verdict("T3♯", status, H, evidence, "sampled")
        finite = [n for n in rows if not scan.open_tail[n]]
        late = [n for n in rows if scan.open_tail[n] and scan.last_nonzero[n] > H // 2]
        evidence.update({"declared_finite_rows": len(finite), "open_rows": len(rows) - len(finite)})
        if len(finite) == len(rows):
            return self._verdict("T3♯", status, H, evidence, "sampled")
        if late and I.tall:
            evidence.update({"witness_row": late[0], "witness_column": int(scan.last_nonzero[late[0]])})
            return self._verdict("T3♯", "Fail", H, evidence, "sampled")
        return self._verdict("T3♯", "Inconclusive", H, evidence, "sampled")

    def _operator_series(self, A: BlockMatrix, scan: RowScan) -> ConditionVerdict:
        """T4♭: 各行で Σ_k A_{n,k} が成分ごとに収束するか"""
        H = scan.horizon
        cuts = [H // 4, H // 2, H]
        statuses, witness = [], None
        for n in self.sample_rows(scan.rows):
            if not scan.open_tail[n]:
                statuses.append("Pass")
                continue
            row = A.row(n, H)
            entries = row.dense().reshape(len(row.ks), -1) if len(row.ks) else np.zeros((0, A.m * A.d))
            partial = [entries[row.ks <= c].sum(axis=0) for c in cuts]
            first = float(np.abs(partial[1] - partial[0]).max(initial=0.0))
            last = float(np.abs(partial[2] - partial[1]).max(initial=0.0))
            scale = max(1.0, float(np.abs(partial[2]).max(initial=0.0)))
            if last <= self.settings.stabilization_tol * scale:
                status = "Pass"
            elif last > self.settings.fail_floor and last >= self.settings.persist_ratio * first:
                status = "Fail"
            else:
                status = "Inconclusive"
            statuses.append(status)
            if status == "Fail" and witness is None:
                witness = {"witness_row": n, "jump": last}
        return self._verdict("T4♭", combine_status(statuses), H, witness or {}, "sampled")

    def _group_null(self, cid: str, J: IdealSpec, scan: RowScan, tol: Optional[float]) -> ConditionVerdict:
        """𝒥-lim_n ‖A_{n,E}‖ = 0（上界で Pass、下界で Fail）"""
        statuses, trails, witness = [], {}, None
        for literal, stat in scan.masks.items():
            upper = self._trail(J, stat.upper, tol)
            trails[literal] = upper.trail
            if upper.status == "Pass":
                statuses.append("Pass")
                continue
            lower = self._trail(J, stat.lower, tol)
            statuses.append("Fail" if lower.status == "Fail" else "Inconclusive")
            if lower.status == "Fail" and witness is None:
                witness = {"witness": literal, "witness_row": lower.witness, "witness_value": float(stat.lower[lower.witness])}
        evidence: Dict[str, Any] = {"cases": trails}
        if witness:
            evidence.update(witness)
        return self._verdict(cid, combine_status(statuses), scan.horizon, evidence, "sampled")

    # ---- F: 有限次元 --------------------------------------------------------

    def check_F(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        horizon: int,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
        ids: Sequence[str] = ("F1", "F4", "F6"),
    ) -> List[ConditionVerdict]:
        """成分の絶対値和による F1, F4, F6, F6′"""
        T = self._target(A, T)
        samples = self._validated_samples(I, E_samples)
        scan = self.scan(A, horizon, ONE_NORMS, samples)
        out = []
        for cid in (normalize_condition_id(c) for c in ids):
            if cid == "F1":
                trail = scan.sup_trail(scan.abs_totals)
                status, evidence = growth_verdict(trail, self.settings)
                if status == "Fail":
                    evidence["witness_row"] = int(np.argmax(scan.abs_totals))
                out.append(self._verdict("F1", status, scan.horizon, {**evidence, "trail": trail}))
            elif cid == "F4":
                out.append(self._vanishing("F4", J, self._row_sum_deviation(scan, T), scan, tol))
            elif cid == "F6":
                out.append(self._masked_abs("F6", J, scan, tol, lambda s: s.abs))
            elif cid == "F6′":
                out.append(self._vanishing("F6′", J, scan.abs_totals, scan, tol))
            else:
                raise ValueError(f"未知の条件です: {cid}")
        return out

    def _masked_abs(
        self, cid: str, J: IdealSpec, scan: RowScan, tol: Optional[float], pick: Callable[[MaskStats], np.ndarray]
    ) -> ConditionVerdict:
        statuses, trails, witness = [], {}, None
        for literal, stat in scan.masks.items():
            values = pick(stat)
            tv = self._trail(J, values, tol)
            statuses.append(tv.status)
            trails[literal] = tv.trail
            if tv.status == "Fail" and witness is None:
                witness = {"witness": literal, "witness_row": tv.witness, "witness_value": float(values[tv.witness])}
        evidence: Dict[str, Any] = {"cases": trails}
        if witness:
            evidence.update(witness)
        return self._verdict(cid, combine_status(statuses), scan.horizon, evidence, "sampled")

    # ---- R: 可算生成 𝒥 -------------------------------------------------------

    def _r1_unbounded(
        self,
        scan: RowScan,
        index: np.ndarray,
        per_prefix: List[np.ndarray],
        statuses: List[str],
        evidence: Dict[str, Any],
    ) -> Tuple[str, Dict[str, Any]]:
        """どの t₀ でも Q_{t₀} の外の行ノルムが非有界かを判定"""
        if "Pass" in statuses or not statuses:
            return "Inconclusive", evidence
        if all(s == "Fail" for s in statuses):
            off = np.where(index > len(statuses) - 1, scan.abs_totals, 0.0)
            return "Fail", {**evidence, "witness_row": int(np.argmax(off))}
        # 番号 L の行だけで増大すれば t < L のすべての補集合で非有界
        counts = np.bincount(index[: scan.prefixes[0] + 1], minlength=len(per_prefix[0]))
        resolved = np.flatnonzero(counts[1:] >= self.settings.sample_rows) + 1
        if not len(resolved):
            return "Inconclusive", evidence
        level = int(resolved.max())
        trail = [float(levels[level]) for levels in per_prefix]
        status, growth = growth_verdict(trail, self.settings)
        if status != "Fail":
            return "Inconclusive", evidence
        level_rows = np.where(index == level, scan.abs_totals, -np.inf)
        return "Fail", {
            **growth,
            "trail": trail,
            "unbounded_level": level,
            "witness_row": int(np.argmax(level_rows)),
        }

    def check_R(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        horizon: int,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
    ) -> List[ConditionVerdict]:
        """R1, R2, R4, R6。t₀ は生成集合の番号から探す"""
        if not J.countably_generated:
            raise UnsupportedIdeal(f"R 条件には生成集合が明示された 𝒥 が必要です: {J.to_literal()}")
        T = self._target(A, T)
        samples = self._validated_samples(I, E_samples)
        scan = self.scan(A, horizon, ONE_NORMS, samples)
        N, H = scan.rows, scan.horizon
        index = J.generator_index_array(N)
        size = int(index.max()) + 1
        p0 = scan.prefixes[0]
        # 補集合が最初の窓にも行を持つ t だけを調べる
        t_max = int(index[: p0 + 1].max())
        per_prefix = [_level_maxima(scan.abs_totals, index, p, size) for p in scan.prefixes]
        off_trails = np.stack([_sup_off_levels(levels) for levels in per_prefix], axis=1)

        row_rank = np.zeros(N + 1, dtype=np.int64)
        for n in np.flatnonzero(scan.open_tail):
            row_rank[n] = _STATUS_RANK[growth_verdict(list(scan.abs_cuts[n]), self.settings)[0]]
        level_rank = np.zeros(size, dtype=np.int64)
        np.maximum.at(level_rank, index, row_rank)
        r2_ranks = np.maximum.accumulate(level_rank)

        chosen = None
        r1_statuses: List[str] = []
        r1_evidence: Dict[str, Any] = {}
        for t in range(t_max):
            trail = off_trails[t].tolist()
            r1, evidence = growth_verdict(trail, self.settings)
            r1_statuses.append(r1)
            r1_evidence = {**evidence, "trail": trail, "t0": t}
            if r1 == "Pass" and r2_ranks[t] == 0:
                chosen = t
                break

        def r2_evidence(t: int) -> Dict[str, Any]:
            evidence: Dict[str, Any] = {"t0": t, "rows_in_Q": int((index <= t).sum())}
            failing = np.flatnonzero((index <= t) & (row_rank == 2))
            if len(failing):
                evidence["witness_row"] = int(failing[0])
            return evidence

        if chosen is not None:
            r1_verdict = self._verdict("R1", "Pass", H, r1_evidence, bindings={"t0": chosen})
            r2_verdict = self._verdict("R2", "Pass", H, r2_evidence(chosen), bindings={"t0": chosen})
        else:
            r1_status, r1_evidence = self._r1_unbounded(scan, index, per_prefix, r1_statuses, r1_evidence)
            r1_verdict = self._verdict("R1", r1_status, H, r1_evidence)
            # Q_0 で失敗する行はすべての Q_t に含まれる
            if r2_ranks[0] == 2:
                r2_verdict = self._verdict("R2", "Fail", H, r2_evidence(0))
            else:
                r2_verdict = self._verdict("R2", "Inconclusive", H, r2_evidence(max(t_max - 1, 0)))
        r4 = self._vanishing("R4", J, self._row_sum_deviation(scan, T), scan, tol)
        r6 = self._masked_abs("R6", J, scan, tol, lambda s: s.abs)
        return [r1_verdict, r2_verdict, r4, r6]

    # ---- M: 階数1 -----------------------------------------------------------

    def scalar_part(self, A: BlockMatrix) -> BlockMatrix:
        """A_{n,k} = a_{n,k}·A₀ のスカラー行列 (a_{n,k})"""
        if A.rank_one is None:
            raise NotRankOne(f"{A.name} には階数1構造が宣言されていません")
        with self._lock:
            cached = self._scalars.get(id(A))
            if cached is not None and cached[0] is A:
                return cached[1]
        scalar = A.rank_one.scalar
        part = BlockMatrix(
            1,
            1,
            lambda n, ks: np.asarray(scalar(n, ks), dtype=float)[:, None, None],
            name=f"scalar({A.name})",
            column_finite_bound=A.column_finite_bound,
            support_start=A.support_start,
            row_support=A.row_support,
            tail_decay_certificate=A.tail_decay_certificate,
            row_horizon=A.row_horizon,
        )
        with self._lock:
            self._scalars[id(A)] = (A, part)
        return part

    def check_M(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        horizon: int,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
    ) -> List[ConditionVerdict]:
        """M0, M1, M4, M6"""
        scalar = self.scalar_part(A)
        T = self._target(A, T)
        A0 = np.asarray(A.rank_one.A0, dtype=float)
        norm_A0 = self.matrix_service.op_norm_block(A0)
        H = horizon
        m0 = self._verdict("M0", "Pass", H, {"A0_norm": norm_A0})
        f1, f6 = self.check_F(scalar, np.ones((1, 1)), I, J, horizon, tol, E_samples, ids=("F1", "F6"))
        m1 = f1.model_copy(update={"id": "M1"})
        m6 = f6.model_copy(update={"id": "M6"})
        scan = self.scan(scalar, horizon, ONE_NORMS, self._validated_samples(I, E_samples))
        sums = scan.totals.reshape(-1)
        tol_value = self.settings.limit_tol if tol is None else tol
        estimate = self.ideal_service.lim_of(J, sums, max(tol_value, self.settings.limit_tol))
        frob = float((A0 * A0).sum())
        if frob == 0.0:
            kappa_T = 0.0
            residual = float(np.abs(T).max())
        else:
            kappa_T = float((T * A0).sum()) / frob
            residual = float(np.abs(T - kappa_T * A0).max())
        evidence: Dict[str, Any] = {"kappa_target": kappa_T, "kappa_estimate": estimate.value, "kappa_status": estimate.status}
        if residual > tol_value:
            evidence["residual"] = residual
            m4 = self._verdict("M4", "Fail", H, {**evidence, "reason": "T は A₀ の倍数ではありません"})
        else:
            tv = self._trail(J, np.abs(sums - kappa_T), tol)
            evidence.update(tv.evidence)
            if tv.witness is not None:
                evidence["witness_row"] = tv.witness
            m4 = self._verdict("M4", tv.status, H, evidence, bindings={"kappa": kappa_T})
        return [m0, m1, m4, m6]

    # ---- B: tall な ℐ -------------------------------------------------------

    def check_B(
        self,
        A: BlockMatrix,
        I: IdealSpec,
        J: IdealSpec,
        horizon: int,
        tol: Optional[float] = None,
        ctx: NormContext = ONE_NORMS,
    ) -> List[ConditionVerdict]:
        """B1（列の有限性）, B2, B3"""
        if not I.tall:
            raise UnsupportedIdeal(f"B 条件は tall な ℐ（density, summable）でのみ判定できます: {I.to_literal()}")
        scan = self.scan(A, horizon, ctx)
        N, H = scan.rows, scan.horizon
        k1_trail = [int(scan.last_nonzero[: p + 1].max()) + 1 for p in scan.prefixes]
        k1 = k1_trail[-1]
        open_rows = np.flatnonzero(scan.open_tail)
        growth = self.settings.divergence_growth
        b1_evidence: Dict[str, Any] = {"k1_trail": k1_trail, "open_rows": int(len(open_rows))}
        if k1_trail[1] > 0 and k1_trail[2] >= (1 + growth) * k1_trail[1] and k1_trail[1] >= (1 + growth) * max(k1_trail[0], 1):
            witness = int(np.argmax(scan.last_nonzero))
            b1 = self._verdict(
                "B1", "Fail", H, {**b1_evidence, "witness_row": witness, "witness_column": int(scan.last_nonzero[witness])}
            )
        elif k1_trail[1] == k1_trail[2] and len(open_rows) == 0:
            b1 = self._verdict("B1", "Pass", H, b1_evidence, bindings={"k1": k1})
        else:
            b1 = self._verdict("B1", "Inconclusive", H, b1_evidence, bindings={"k1": k1})
        if k1 == 0:
            return [b1, self._verdict("B2", "Pass", H, {"void": True}), self._verdict("B3", "Pass", H, {"void": True})]
        K = min(k1, scan.direction_norms.shape[1])
        quantifier = "sampled" if K < k1 else "exact"
        b2_statuses, b2_witness = [], None
        for k in range(K):
            for p in range(scan.direction_norms.shape[2]):
                status, _ = growth_verdict(scan.sup_trail(scan.direction_norms[:, k, p]), self.settings)
                b2_statuses.append(status)
                if status == "Fail" and b2_witness is None:
                    b2_witness = {"witness_column": k, "witness_row": int(np.argmax(scan.direction_norms[:, k, p]))}
        b2 = self._verdict("B2", combine_status(b2_statuses), H, b2_witness or {}, quantifier, {"k1": k1})
        b3 = self._columns_vanish("B3", J, scan.column_norms[:, :K], scan, tol)
        b3 = b3.model_copy(update={"quantifier": quantifier, "bindings": {"k1": k1}})
        return [b1, b2, b3]

    # ---- K: ブロック証拠用の有限次元条件 ------------------------------------

    def check_K(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        horizon: int,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
        ctx: NormContext = ONE_NORMS,
    ) -> List[ConditionVerdict]:
        """K1 = F1, K2 = F4, K3: 𝒥-lim Σ_{k∈E} Σ_j ‖a_{n,k}(·,j)‖ = 0"""
        f1, f4 = self.check_F(A, T, I, J, horizon, tol, E_samples, ids=("F1", "F4"))
        scan = self.scan(A, horizon, ctx, self._validated_samples(I, E_samples))
        k3 = self._masked_abs("K3", J, scan, tol, lambda s: s.column_sums)
        return [f1.model_copy(update={"id": "K1"}), f4.model_copy(update={"id": "K2"}), k3]

    # ---- 任意の条件の一括判定 -----------------------------------------------

    def check_conditions(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        ids: Sequence[str],
        horizon: int,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
        x_samples: Optional[Sequence[SequenceView]] = None,
        ctx: NormContext = ONE_NORMS,
        fixed_k0: Optional[int] = None,
    ) -> Dict[str, ConditionVerdict]:
        """条件 ID のリストを族ごとにまとめて判定し、ID 順の辞書で返す"""
        ids = [normalize_condition_id(c) for c in ids]
        results: Dict[str, ConditionVerdict] = {}

        def take(verdicts: List[ConditionVerdict]) -> None:
            for v in verdicts:
                if v.id in ids:
                    results[v.id] = v

        s_ids = [c for c in ids if c.startswith("S")]
        if s_ids:
            take(self.check_S(A, T, horizon, tol, sharp="S3♯" in s_ids, ctx=ctx, fixed_k0=fixed_k0))
        t_ids = [c for c in ids if c in T_CONDITIONS]
        if t_ids:
            take(self.check_T(A, T, I, J, horizon, tol, E_samples, x_samples, t_ids, ctx, fixed_k0))
        f_ids = [c for c in ids if c.startswith("F")]
        if f_ids:
            take(self.check_F(A, T, I, J, horizon, tol, E_samples, f_ids))
        if any(c.startswith("R") for c in ids):
            take(self.check_R(A, T, I, J, horizon, tol, E_samples))
        if any(c.startswith("M") for c in ids):
            take(self.check_M(A, T, I, J, horizon, tol, E_samples))
        if any(c.startswith("B") for c in ids):
            take(self.check_B(A, I, J, horizon, tol, ctx))
        if any(c.startswith("K") for c in ids):
            take(self.check_K(A, T, I, J, horizon, tol, E_samples, ctx))
        for index, cid in enumerate(("N2", "N3", "N2′")):
            if cid in ids:
                scan = self.scan(A, horizon, ctx)
                status, evidence = self._beta_rows(A, scan, ctx, index)
                results[cid] = self._verdict(cid, status, scan.horizon, evidence, "sampled")
        missing = [c for c in ids if c not in results]
        if missing:
            raise ValueError(f"未知の条件です: {missing}")
        return {c: results[c] for c in ids}

    # ---- 定理レベルの判定 ---------------------------------------------------

    def select_mode(self, A: BlockMatrix, I: IdealSpec, J: IdealSpec) -> str:
        """構造から適用する定理を選ぶ"""
        if I.kind == "fin" and J.kind == "fin":
            return "silverman_toeplitz" if A.is_scalar else "fin_fin"
        finite_ok = I.kind == "fin" or J.countably_generated or A.nonnegative
        if A.rank_one is not None and not A.is_scalar and finite_ok:
            return "rank_one"
        if finite_ok:
            return "finite_dimensional"
        return "general"

    @staticmethod
    def _inapplicable(mode: str, A: BlockMatrix, I: IdealSpec, J: IdealSpec) -> Optional[str]:
        finite_ok = I.kind == "fin" or J.countably_generated or A.nonnegative
        if mode == "silverman_toeplitz" and not (I.kind == J.kind == "fin" and A.is_scalar):
            return "スカラー行列かつ ℐ = 𝒥 = Fin の場合のみ適用できます"
        if mode == "fin_fin" and not (I.kind == J.kind == "fin"):
            return "ℐ = 𝒥 = Fin の場合のみ適用できます"
        if mode in ("finite_dimensional", "rank_one") and not finite_ok:
            return "ℐ = Fin、𝒥 が可算生成、または A が非負の場合のみ適用できます"
        if mode == "rank_one" and A.rank_one is None:
            return "階数1構造が宣言されていません"
        if mode == "positive_order_unit" and not A.nonnegative:
            return "非負行列の場合のみ適用できます"
        if mode == "tall_to_null" and not I.tall:
            return "tall な ℐ の場合のみ適用できます"
        if mode in (
            "countably_generated",
            "generated_unbounded",
            "selective_bounded",
            "selective_unbounded",
            "bounded_to_bounded",
            "convergent_to_bounded",
        ) and not J.countably_generated:
            return "𝒥 が可算生成（生成集合が明示された）場合のみ適用できます"
        return None

    def _plan_implications(self, ids: Sequence[str], A: BlockMatrix, I: IdealSpec, J: IdealSpec) -> List[Implication]:
        """直接評価を省略できる条件と、その根拠となる含意"""
        planned: Dict[str, Implication] = {}
        for imp in IMPLICATIONS:
            if imp.target in planned or not imp.applies(A, I, J):
                continue
            if all(p in planned or (p in ids and p != imp.target) for p in imp.premises):
                planned[imp.target] = imp
        # 直接評価される条件が前提の連鎖に必ず含まれるようにする
        return [imp for imp in IMPLICATIONS if planned.get(imp.target) is imp]

    def regular_verdict(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        mode: str = "auto",
        horizon: Optional[int] = None,
        tol: Optional[float] = None,
        E_samples: Optional[Sequence[DescriptorBase]] = None,
        x_samples: Optional[Sequence[SequenceView]] = None,
        audit: bool = False,
        behavioral: bool = True,
        ctx: NormContext = ONE_NORMS,
        seed: int = 0,
    ) -> RegularityReport:
        """選んだ定理の条件だけを評価し、含意で省略できるものは省略する"""
        horizon = horizon or self.settings.default_horizon
        T = self._target(A, T)
        mode = self.select_mode(A, I, J) if mode == "auto" else mode
        if mode not in THEOREM_MODES:
            raise ValueError(f"未知のモードです: {mode}（{', '.join(THEOREM_MODES)}）")
        theorem = THEOREM_MODES[mode]
        reason = self._inapplicable(mode, A, I, J)
        if reason is not None:
            logger.warning(f"モード {mode} は適用できません: {reason}")
            return RegularityReport(
                theorem=mode, conditions=[], overall="Inconclusive", explanation=reason, horizon=horizon
            )
        logger.info(f"正則性判定を開始します: {A.name}, ℐ={I.to_literal()}, 𝒥={J.to_literal()}, モード={mode}")
        fixed_k0 = None
        if mode == "positive_order_unit":
            ctx = NormContext(domain_norm="sup_unit", codomain_norm=ctx.codomain_norm)
            fixed_k0 = 0
        ids = list(theorem.required + theorem.hypotheses)
        plan = [] if audit else self._plan_implications(ids, A, I, J)
        skipped = {imp.target for imp in plan}
        direct = [c for c in ids if c not in skipped]
        results = self.check_conditions(A, T, I, J, direct, horizon, tol, E_samples, x_samples, ctx, fixed_k0)
        implications: List[str] = []
        derived: Dict[str, ConditionVerdict] = {}
        for imp in plan:
            premises = [results.get(p) or derived.get(p) for p in imp.premises]
            if all(v is not None and v.status == "Pass" for v in premises):
                quantifier = "sampled" if any(v.quantifier == "sampled" for v in premises) else "exact"
                derived[imp.target] = self._verdict(
                    imp.target, "Pass", horizon, {"implied_by": list(imp.premises)}, quantifier
                )
                implications.append(imp.text)
            elif imp.target in ids:
                results.update(
                    self.check_conditions(A, T, I, J, [imp.target], horizon, tol, E_samples, x_samples, ctx, fixed_k0)
                )
        for cid in ids:
            if cid in derived and cid not in results:
                results[cid] = derived[cid]
        if "T2" in results and results["T2"].evidence.get("void"):
            implications.append("dim X < ∞: k₀ = 0 を選べるため T2 は自明")
        if audit:
            self._audit_implications(results, A, I, J)
        conditions = [results[c] for c in ids]
        overall, explanation = self._overall(theorem, conditions, T)
        summary = None
        if behavioral and theorem.behavioral:
            summary = self.empirical_regularity(A, T, I, J, horizon=horizon, seed=seed, ctx=ctx)
            if overall == "Regular" and not summary.consistent:
                logger.warning(f"条件は Pass ですが挙動チェックの偏差が大きいです: {summary.max_deviation:.3g}")
                explanation += f"（挙動チェックの最大偏差 {summary.max_deviation:.3g} が許容値を超えています）"
            elif overall == "Regular":
                explanation += "（挙動チェックと整合）"
        logger.info(f"正則性判定が完了しました: {mode} → {overall}")
        return RegularityReport(
            theorem=mode,
            conditions=conditions,
            overall=overall,
            behavioral=summary,
            implications=implications,
            explanation=explanation,
            horizon=horizon,
        )

    def _audit_implications(self, results: Dict[str, ConditionVerdict], A: BlockMatrix, I: IdealSpec, J: IdealSpec) -> None:
        for imp in IMPLICATIONS:
            if not imp.applies(A, I, J) or imp.target not in results:
                continue
            premises = [results.get(p) for p in imp.premises]
            if all(v is not None and v.status == "Pass" for v in premises) and results[imp.target].status == "Fail":
                logger.warning(f"含意 {imp.text} と直接判定が矛盾しています（{imp.target} = Fail）")

    def _overall(self, theorem: TheoremMode, conditions: List[ConditionVerdict], T: np.ndarray) -> Tuple[str, str]:
        required = [v for v in conditions if v.id in theorem.required]
        hypotheses = [v for v in conditions if v.id in theorem.hypotheses]
        failed = [v.id for v in required if v.status == "Fail"]
        failed += [v.id for v in hypotheses if v.status == "Fail" and v.id in _NECESSARY_HYPOTHESES]
        if theorem.name == "tall_to_null" and np.any(T != 0):
            return "NotRegular", "tall な ℐ では T ≠ 0 に関して正則な行列は存在しません"
        if failed:
            return "NotRegular", f"{theorem.description}: {', '.join(failed)} が不成立です"
        pending = [v.id for v in required + hypotheses if v.status != "Pass"]
        if pending:
            return "Inconclusive", f"{theorem.description}: {', '.join(pending)} がホライズン内で判定できません"
        sampled = any(v.quantifier == "sampled" for v in conditions)
        note = "（全称条件はサンプル上で検証）" if sampled else ""
        return "Regular", f"{theorem.description}: すべての条件が Pass です{note}"

    # ---- 挙動クロスチェック -------------------------------------------------

    def default_families(self, I: IdealSpec, dim: int) -> List[NamedFamily]:
        builder = FamilyBuilder(self.settings)
        families = [builder.convergent(None, "harmonic", dim)]
        suite = self.settings.sample_suite(I.kind)
        spikes = list(suite.spike_sets)
        if suite.use_generators and I.generators:
            spikes.append(I.generators[0])
        for S in spikes[:1]:
            families.append(builder.spiky(None, None, S, I, dim))
        supports = list(suite.e_samples) or [I.generator(0)]
        families.append(builder.c00_supported(supports[0], I, dim))
        return families

    def empirical_regularity(
        self,
        A: BlockMatrix,
        T: Any,
        I: IdealSpec,
        J: IdealSpec,
        families: Optional[Sequence[NamedFamily]] = None,
        trials: Optional[int] = None,
        horizon: Optional[int] = None,
        tol: Optional[float] = None,
        seed: int = 0,
        ctx: NormContext = ONE_NORMS,
    ) -> BehavioralSummary:
        """宣言された ℐ-極限 η を持つ系列を変換し、𝒥-limsup ‖A_n x − Tη‖ を測る"""
        T = self._target(A, T)
        trials = trials or self.settings.behavioral_trials
        H = min(horizon or self.settings.behavioral_horizon, self.settings.behavioral_horizon)
        tol = self.settings.behavioral_tol if tol is None else tol
        families = list(families) if families is not None else self.default_families(I, A.d)
        members: List[Tuple[str, SequenceView]] = []
        for family in families:
            if not family.limit_declared:
                continue
            members += [(family.name, x) for x in family.members(trials, seed)]
        N = A.clamp_horizon(H)
        logger.info(f"挙動チェックを開始します: {A.name}, 系列 {len(members)} 本, 行 ≤ {N}")
        base = np.stack([x.sample(H) for _, x in members], axis=2) if members else np.zeros((H + 1, A.d, 0))
        targets = np.stack([T @ x.limit for _, x in members], axis=1) if members else np.zeros((A.m, 0))
        deviation = np.zeros((N + 1, len(members)))
        for n in range(N + 1):
            row = A.full_row(n, H)
            if not len(row.ks):
                deviation[n] = ctx.vector_norm(-targets, axis=0)
                continue
            inside = row.ks <= H
            xs = np.empty((len(row.ks), A.d, len(members)))
            xs[inside] = base[row.ks[inside]]
            if not inside.all():
                far = row.ks[~inside]
                xs[~inside] = np.stack([x.sample_at(far) for _, x in members], axis=2)
            deviation[n] = ctx.vector_norm(row.apply_many(xs) - targets, axis=0)
        scores = [self.ideal_service.limsup_of(J, deviation[:, t]).value for t in range(len(members))]
        max_deviation = max(scores, default=0.0)
        order = np.argsort(scores)[::-1]
        witnesses = [
            {"family": members[t][0], "member": members[t][1].name, "deviation": float(scores[t])}
            for t in order[:5]
            if scores[t] > tol
        ]
        logger.info(f"挙動チェックが完了しました: 最大偏差 {max_deviation:.3g}")
        return BehavioralSummary(
            families=[f.name for f in families],
            trials=len(members),
            horizon=N,
            max_deviation=float(max_deviation),
            consistent=bool(max_deviation <= tol),
            tol=tol,
            witnesses=witnesses,
        )

    # ---- 行ごとの診断 -------------------------------------------------------

    def row_diagnostics(
        self, A: BlockMatrix, T: Any, horizon: int, ctx: NormContext = ONE_NORMS
    ) -> List[RowDiagnostics]:
        """CSV 出力用の行ごとの集計"""
        T = self._target(A, T)
        scan = self.scan(A, horizon, ctx)
        k0 = int(self._tail_bound("S1", scan).bindings.get("k0", 0))
        c = scan.cut_index(k0)
        deviation = self._row_sum_deviation(scan, T)
        return [
            RowDiagnostics(
                n=n,
                abs_total=float(scan.abs_totals[n]),
                group_norm_upper=float(scan.tail_upper[n, 0]),
                row_sum_deviation=float(deviation[n]),
                tail_upper=float(scan.tail_upper[n, c]),
            )
            for n in range(scan.rows + 1)
        ]
