"""イデアル所属の判定と、有限ホライズンでのイデアル極限・上極限の推定"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional

import numpy as np

from src.config.settings import Settings
from src.models.descriptors import (
    ComplementSet,
    DescriptorBase,
    IdealSpec,
    NamedSparse,
    UnionSet,
    nu2,
    nu2_array,
)
from src.models.errors import InsufficientHorizon, UnsupportedIdeal
from src.models.schemas import IdealLimitReport, Membership
from src.models.sequences import SequenceView

logger = logging.getLogger(__name__)

IN, NOT_IN, UNKNOWN = "In", "NotIn", "UnknownAtHorizon"


def density_prefix(S: DescriptorBase, N: int) -> Fraction:
    """|S ∩ [0,N]| / (N+1) を有理数で返す"""
    if N < 0:
        raise ValueError(f"N は 0 以上である必要があります: {N}")
    return Fraction(S.count_prefix(N), N + 1)


@lru_cache(maxsize=64)
def _generator_indices(ideal: IdealSpec, N: int) -> np.ndarray:
    out = ideal.generator_index_array(N)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _cover_mask(ideal: IdealSpec, N: int) -> np.ndarray:
    out = ideal.cover().mask(N)
    out.setflags(write=False)
    return out


def _nu2_bounded(period: int, residues: np.ndarray) -> bool:
    """周期部分の各剰余類で ν₂ が有界か"""
    if residues[0]:
        return False
    a = nu2(period)
    return all(nu2(int(r)) < a for r in np.flatnonzero(residues))


def _cluster_keys(values: np.ndarray, tol: float) -> np.ndarray:
    """tol 刻みの格子番号（int64 に収まるよう ±2^52 で打ち切る）"""
    scaled = np.clip(np.nan_to_num(values / tol, posinf=2.0**52, neginf=-(2.0**52)), -(2.0**52), 2.0**52)
    return np.round(scaled).astype(np.int64)


@dataclass
class TrailVerdict:
    """「𝒥-lim v_n = 0」の三点トレイル判定"""

    status: str
    trail: List[float]
    witness: Optional[int] = None
    evidence: Dict[str, Any] = field(default_factory=dict)


class IdealService:
    """イデアル所属・イデアル極限・上極限のサービス"""

    def __init__(self, settings: Settings):
        self.settings = settings

    # ---- 記号的な所属判定 -------------------------------------------------

    def _diagnostic(self, S: DescriptorBase) -> Dict[str, float]:
        N = self.settings.default_horizon
        elements = S.elements(N)
        return {
            "horizon": float(N),
            "prefix_density": len(elements) / (N + 1),
            "reciprocal_sum": math.fsum(1.0 / (elements + 1.0)) if len(elements) else 0.0,
            "max_nu2": float(nu2_array(elements).max()) if len(elements) else 0.0,
        }

    def _sparse_remainder(self, S: DescriptorBase, negligible_atoms: bool) -> str:
        """周期部分が空（または ℐ に入る）ときの疎な原子の扱い

        negligible_atoms はすべての名前付き疎集合がイデアルに入る場合 True。
        """
        positive = [atom for atom, polarity in S.sparse_occurrences() if polarity]
        if not positive or negligible_atoms:
            return IN
        if any(S.structurally_contains(atom) for atom in positive):
            return NOT_IN
        return UNKNOWN

    def _decide(self, ideal: IdealSpec, S: DescriptorBase) -> str:
        if ideal.kind == "generated":
            # S \ (Q_0 ∪ … ∪ Q_{L-1}) が有限かどうか
            rest = ComplementSet(inner=UnionSet(parts=(ComplementSet(inner=S), ideal.cover())))
            return self._decide(IdealSpec(kind="fin"), rest)
        generic = S.generic()
        if generic is None:
            return UNKNOWN
        period, residues = generic
        if ideal.kind == "nu2":
            if not residues.any() or _nu2_bounded(period, residues):
                # 名前付き疎集合はいずれも ν₂ が非有界
                return self._sparse_remainder(S, negligible_atoms=False)
            return NOT_IN
        if residues.any():
            # 正の密度を持つ周期部分
            return NOT_IN
        return self._sparse_remainder(S, negligible_atoms=ideal.kind in ("density", "summable"))

    def ideal_member(self, ideal: IdealSpec, S: DescriptorBase) -> Membership:
        """S ∈ ℐ を三値で判定"""
        status = self._decide(ideal, S)
        logger.debug(f"所属判定: {S.to_literal()} ∈ {ideal.to_literal()} → {status}")
        return Membership(status=status, diagnostic=self._diagnostic(S))

    def tall_partition(self, ideal: IdealSpec, count: int) -> List[NamedSparse]:
        """対関数の行による ω の分割の最初の count 行"""
        if not ideal.tall:
            raise UnsupportedIdeal(f"{ideal.to_literal()} は tall ではないため分割を構成できません")
        if count < 1:
            raise ValueError(f"行数は 1 以上である必要があります: {count}")
        return [NamedSparse(family="pairing_row", r=r) for r in range(count)]

    # ---- 有限ホライズンでの分類 -------------------------------------------

    def classify_sampled(self, ideal: IdealSpec, mask: np.ndarray) -> str:
        """[0,H] 上の集合をホライズンの挙動から分類"""
        mask = np.asarray(mask, dtype=bool)
        H = len(mask) - 1
        if not mask.any():
            return IN
        if H < 4:
            return UNKNOWN
        if ideal.kind == "fin":
            return self._classify_tail(mask)
        if ideal.kind == "generated":
            return self._classify_tail(mask & ~_cover_mask(ideal, H))
        if ideal.kind == "nu2":
            index = _generator_indices(ideal, H)[mask]
            G = int(_generator_indices(ideal, H).max())
            if index.max() <= G / 2:
                return IN
            upper = index > 3 * G / 4
            middle = (index > G / 2) & ~upper
            return NOT_IN if upper.any() and middle.any() else UNKNOWN
        if ideal.kind == "density":
            return self._classify_density(mask)
        return self._classify_summable(mask)

    @staticmethod
    def _classify_tail(mask: np.ndarray) -> str:
        H = len(mask) - 1
        if not mask[H // 2 + 1 :].any():
            return IN
        if mask[H // 2 : 3 * H // 4].any() and mask[3 * H // 4 :].any():
            return NOT_IN
        return UNKNOWN

    def _classify_density(self, mask: np.ndarray) -> str:
        H = len(mask) - 1
        if not mask[H // 2 + 1 :].any():
            return IN
        counts = np.cumsum(mask)
        points = [H // 4, H // 2, H]
        d1, d2, d3 = (counts[p] / (p + 1) for p in points)
        threshold = self.settings.density_threshold
        if d1 > d2 > d3 and d3 < threshold and d3 <= self.settings.vanish_ratio * d1:
            return IN
        if d3 >= threshold and d3 >= 0.8 * d1:
            return NOT_IN
        return UNKNOWN

    def _classify_summable(self, mask: np.ndarray) -> str:
        H = len(mask) - 1
        if not mask[H // 2 + 1 :].any():
            return IN
        weights = np.where(mask, 1.0 / (np.arange(H + 1) + 1.0), 0.0)
        b1 = math.fsum(weights[H // 4 + 1 : H // 2 + 1])
        b2 = math.fsum(weights[H // 2 + 1 :])
        threshold = self.settings.summable_threshold
        if b2 < threshold and b2 <= self.settings.persist_ratio * b1:
            return IN
        if b2 >= threshold and b2 >= 0.8 * b1:
            return NOT_IN
        return UNKNOWN

    # ---- 上極限 -------------------------------------------------------------

    def _limsup_at(self, ideal: IdealSpec, values: np.ndarray) -> float:
        levels = np.unique(values)
        lo, hi = 0, len(levels)
        # {y ≥ v_j} が In となる最小の j を二分探索
        while lo < hi:
            mid = (lo + hi) // 2
            if self.classify_sampled(ideal, values >= levels[mid]) == IN:
                hi = mid
            else:
                lo = mid + 1
        if lo == len(levels):
            return float(levels[-1])
        return float(levels[max(lo - 1, 0)])

    @staticmethod
    def _trail_horizons(H: int) -> List[int]:
        return [H // 4, H // 2, H] if H >= 8 else [H]

    def limsup_of(self, ideal: IdealSpec, values: np.ndarray) -> IdealLimitReport:
        """評価済みの値 y_0..y_H から ℐ-limsup を推定"""
        values = np.asarray(values, dtype=float).reshape(-1)
        H = len(values) - 1
        if H <= 0:
            raise InsufficientHorizon("ℐ-limsup の推定にはホライズン 1 以上が必要です")
        trail = [self._limsup_at(ideal, values[: h + 1]) for h in self._trail_horizons(H)]
        estimate = trail[-1]
        tol = max(self.settings.limit_tol, self.settings.stabilization_tol * max(1.0, abs(estimate)))
        stable = len(trail) == 1 or abs(trail[-1] - trail[-2]) <= tol
        return IdealLimitReport(
            estimate=[estimate],
            lower=[min(trail)],
            upper=[max(trail)],
            horizon=H,
            status="Converged" if stable else "Inconclusive",
            tol=tol,
            trail=[[t] for t in trail],
            diagnostic={"ideal": ideal.to_literal()},
        )

    def ideal_limsup(self, ideal: IdealSpec, y: SequenceView, horizon: int) -> IdealLimitReport:
        """スカラー非負系列の ℐ-limsup をしきい値集合の二分探索で推定"""
        if horizon <= 0:
            raise InsufficientHorizon("ℐ-limsup の推定にはホライズン 1 以上が必要です")
        if y.dim != 1:
            raise ValueError("ℐ-limsup はスカラー系列に対してのみ定義されます")
        return self.limsup_of(ideal, y.sample(horizon)[:, 0])

    # ---- 極限 ---------------------------------------------------------------

    def _window(self, ideal: IdealSpec, H: int) -> np.ndarray:
        ns = np.arange(H + 1)
        if ideal.kind == "fin":
            return ns >= H // 2
        if ideal.kind == "generated":
            window = (ns >= H // 2) & ~_cover_mask(ideal, H)
            return window if window.any() else ns >= H // 2
        if ideal.kind == "nu2":
            index = _generator_indices(ideal, H)
            return index >= int(index.max()) // 2
        return np.ones(H + 1, dtype=bool)

    def _weights(self, ideal: IdealSpec, H: int) -> np.ndarray:
        if ideal.kind == "nu2":
            return np.exp2(_generator_indices(ideal, H).astype(float))
        return np.ones(H + 1)

    def _lim_at(self, ideal: IdealSpec, values: np.ndarray, tol: float) -> Dict[str, Any]:
        H = len(values) - 1
        window = self._window(ideal, H)
        indices = np.flatnonzero(window)
        keys = _cluster_keys(values[window], tol)
        clusters, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        weights = np.bincount(inverse, weights=self._weights(ideal, H)[window])
        last_index = np.zeros(len(clusters), dtype=np.int64)
        np.maximum.at(last_index, inverse, indices)
        # 重み最大、同点なら最大添字を含むクラスタ
        order = np.lexsort((-last_index, -weights))
        top = order[0]
        estimate = values[last_index[top]]
        deviation = np.abs(values - estimate).max(axis=1)
        exceptional = self.classify_sampled(ideal, deviation >= tol)
        status = "Inconclusive"
        second_status = None
        if exceptional == IN:
            status = "Converged"
        elif len(order) > 1:
            second = order[1]
            second_key = clusters[second]
            second_mask = np.all(_cluster_keys(values, tol) == second_key, axis=1)
            second_status = self.classify_sampled(ideal, second_mask)
            if second_status == NOT_IN:
                status = "NoLimitDetected"
        summary = [
            {"value": values[last_index[c]].tolist(), "weight": float(weights[c])}
            for c in order[:3]
        ]
        return {
            "estimate": estimate,
            "status": status,
            "exceptional": exceptional,
            "second_cluster": second_status,
            "clusters": summary,
        }

    def lim_of(self, ideal: IdealSpec, values: np.ndarray, tol: float) -> IdealLimitReport:
        """評価済みの値 x_0..x_H（(H+1, d) 配列）から ℐ-lim を推定"""
        if tol <= 0:
            raise ValueError(f"tol は正である必要があります: {tol}")
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        H = len(values) - 1
        if H <= 0:
            raise InsufficientHorizon("ℐ-lim の推定にはホライズン 1 以上が必要です")
        results = [self._lim_at(ideal, values[: h + 1], tol) for h in self._trail_horizons(H)]
        final = results[-1]
        trail = np.array([r["estimate"] for r in results])
        return IdealLimitReport(
            estimate=final["estimate"].tolist(),
            lower=trail.min(axis=0).tolist(),
            upper=trail.max(axis=0).tolist(),
            horizon=H,
            status=final["status"],
            tol=tol,
            trail=trail.tolist(),
            diagnostic={
                "ideal": ideal.to_literal(),
                "exceptional_set": final["exceptional"],
                "second_cluster": final["second_cluster"],
                "clusters": final["clusters"],
            },
        )

    def ideal_lim(
        self, ideal: IdealSpec, x: SequenceView, horizon: int, tol: Optional[float] = None
    ) -> IdealLimitReport:
        """ℐ-lim x を推定し、例外集合の所属で収束を判定"""
        tol = self.settings.limit_tol if tol is None else tol
        report = self.lim_of(ideal, x.sample(horizon), tol)
        logger.debug(f"ℐ-lim 推定 ({ideal.to_literal()}, H={horizon}): {report.estimate} {report.status}")
        return report

    # ---- 0 への収束 ---------------------------------------------------------

    def vanishing_trail(self, ideal: IdealSpec, values: np.ndarray, tol: Optional[float] = None) -> TrailVerdict:
        """非負の値 v_0..v_H について 𝒥-lim v = 0 を判定"""
        values = np.asarray(values, dtype=float).reshape(-1)
        H = len(values) - 1
        if H < 8:
            raise InsufficientHorizon(f"トレイル判定にはホライズン 8 以上が必要です: {H}")
        tol = self.settings.limit_tol if tol is None else tol
        if ideal.countably_generated:
            index = _generator_indices(ideal, H)
            if ideal.kind == "generated":
                index = np.where(_cover_mask(ideal, H), 0, index)
            G = max(int(index.max()), 1)
            regions = [index >= G / 4, index >= G / 2, index >= 3 * G / 4]
            trail = [float(values[r].max()) if r.any() else 0.0 for r in regions]
            last_region = regions[-1]
        else:
            trail = [self._limsup_at(ideal, values[: h + 1]) for h in self._trail_horizons(H)]
            last_region = np.arange(H + 1) > H // 2
        first, last = trail[0], trail[-1]
        evidence = {"trail": trail, "tol": tol}
        non_increasing = all(b <= a * (1 + 1e-9) + tol for a, b in zip(trail, trail[1:]))
        decaying = non_increasing and last <= self.settings.vanish_ratio * first
        if last <= tol or (decaying and last <= self.settings.vanish_floor):
            return TrailVerdict("Pass", trail, evidence=evidence)
        if last > self.settings.fail_floor and last >= self.settings.persist_ratio * first:
            region_values = np.where(last_region, values, -np.inf)
            witness = int(np.argmax(region_values))
            evidence["witness_value"] = float(values[witness])
            return TrailVerdict("Fail", trail, witness=witness, evidence=evidence)
        return TrailVerdict("Inconclusive", trail, evidence=evidence)
