"""作用素ブロック行列 A = (A_{n,k}) の遅延評価"""

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from src.models.errors import UnsupportedNormContext

# 定義域 sup ノルムの作用素ノルムを符号ベクトルの列挙で求める上限次元
SIGN_ENUMERATION_MAX_DIM = 16


class NormContext(BaseModel):
    """定義域 ℝ^d と値域 ℝ^m のノルム

    sup_unit は全て 1 のベクトルを順序単位とする AM 空間のノルム。
    """

    domain_norm: Literal["one", "sup_unit"] = "one"
    codomain_norm: Literal["one", "sup"] = "one"

    class Config:
        frozen = True

    def vector_norm(self, y: np.ndarray, axis: int = -1) -> np.ndarray:
        """値域ノルム"""
        if self.codomain_norm == "one":
            return np.abs(y).sum(axis=axis)
        return np.abs(y).max(axis=axis, initial=0.0)

    def domain_vector_norm(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        if self.domain_norm == "one":
            return np.abs(x).sum(axis=axis)
        return np.abs(x).max(axis=axis, initial=0.0)


ONE_NORMS = NormContext()


def sign_vectors(d: int) -> np.ndarray:
    """{±1}^d を (2^d, d) 配列で返す"""
    return np.array(list(product((1.0, -1.0), repeat=d)))


def extreme_points(d: int, ctx: NormContext) -> np.ndarray:
    """定義域の単位球の端点"""
    if ctx.domain_norm == "one":
        eye = np.eye(d)
        return np.concatenate([eye, -eye])
    return sign_vectors(d)


def block_op_norms(blocks: np.ndarray, ctx: NormContext) -> np.ndarray:
    """(L, m, d) ブロック列の作用素ノルム"""
    absb = np.abs(blocks)
    if ctx.domain_norm == "one":
        # 端点 ±e_j の像 = 列
        if ctx.codomain_norm == "one":
            return absb.sum(axis=1).max(axis=-1, initial=0.0)
        return absb.max(axis=1, initial=0.0).max(axis=-1, initial=0.0)
    if ctx.codomain_norm == "sup":
        return absb.sum(axis=2).max(axis=-1, initial=0.0)
    d = blocks.shape[2]
    if d > SIGN_ENUMERATION_MAX_DIM:
        raise UnsupportedNormContext(f"sup→one ノルムは d ≤ {SIGN_ENUMERATION_MAX_DIM} のみ対応します (d={d})")
    images = np.einsum("lij,sj->lsi", blocks, sign_vectors(d))
    return np.abs(images).sum(axis=2).max(axis=1, initial=0.0)


def diagonal_op_norms(diags: np.ndarray, ctx: NormContext) -> np.ndarray:
    absd = np.abs(diags)
    if ctx.domain_norm == "sup_unit" and ctx.codomain_norm == "one":
        return absd.sum(axis=1)
    return absd.max(axis=1, initial=0.0)


@dataclass(frozen=True)
class RankOne:
    """A_{n,k} = a_{n,k}·A₀ の構造"""

    scalar: Callable[[int, np.ndarray], np.ndarray]
    A0: np.ndarray


@dataclass(frozen=True)
class RowSlice:
    """評価済みの行 n（列 ks のブロック）"""

    n: int
    ks: np.ndarray
    blocks: np.ndarray
    diagonal: bool
    m: int
    d: int

    def __len__(self) -> int:
        return len(self.ks)

    def dense(self) -> np.ndarray:
        if not self.diagonal:
            return self.blocks
        out = np.zeros((len(self.ks), self.m, self.d))
        idx = np.arange(self.d)
        out[:, idx, idx] = self.blocks
        return out

    def restrict(self, keep: np.ndarray) -> "RowSlice":
        return RowSlice(self.n, self.ks[keep], self.blocks[keep], self.diagonal, self.m, self.d)

    def columns_upto(self, hi: int) -> "RowSlice":
        return self.restrict(self.ks <= hi)

    def abs_sums(self) -> np.ndarray:
        """各ブロックの Σ_{i,j} |a(i,j)|"""
        axes = (1,) if self.diagonal else (1, 2)
        return np.abs(self.blocks).sum(axis=axes)

    def entry_abs_sums(self) -> np.ndarray:
        """成分ごとの Σ_k |a_k(i,j)|"""
        if self.diagonal:
            return np.diag(np.abs(self.blocks).sum(axis=0))
        return np.abs(self.blocks).sum(axis=0)

    def op_norms(self, ctx: NormContext = ONE_NORMS) -> np.ndarray:
        if len(self.ks) == 0:
            return np.zeros(0)
        if self.diagonal:
            return diagonal_op_norms(self.blocks, ctx)
        return block_op_norms(self.blocks, ctx)

    def nonzero(self) -> "RowSlice":
        axes = (1,) if self.diagonal else (1, 2)
        return self.restrict(np.any(self.blocks != 0, axis=axes))

    def total(self) -> np.ndarray:
        """Σ_k A_{n,k}（成分ごとに補償和）"""
        if self.diagonal:
            diag = np.array([math.fsum(self.blocks[:, j]) for j in range(self.d)])
            out = np.zeros((self.m, self.d))
            out[np.arange(self.d), np.arange(self.d)] = diag
            return out
        out = np.empty((self.m, self.d))
        for i in range(self.m):
            for j in range(self.d):
                out[i, j] = math.fsum(self.blocks[:, i, j])
        return out

    def apply(self, xs: np.ndarray) -> np.ndarray:
        """Σ_k A_{n,k} x_k。xs は (len(ks), d)"""
        if self.diagonal:
            return (self.blocks * xs).sum(axis=0)
        return np.einsum("kij,kj->i", self.blocks, xs)

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        """xs は (len(ks), d, T)。戻り値は (m, T)"""
        if self.diagonal:
            return (self.blocks[:, :, None] * xs).sum(axis=0)
        return np.einsum("kij,kjt->it", self.blocks, xs)

    def apply_unit(self) -> np.ndarray:
        """Σ_k A_{n,k}·𝟙"""
        if self.diagonal:
            return self.blocks.sum(axis=0)
        return self.blocks.sum(axis=(0, 2))


class BlockMatrix:
    """m×d 実ブロックの無限行列

    rule(n, ks) は列 ks のブロックを (len(ks), m, d) で返す。diagonal=True の
    場合は対角成分 (len(ks), d) を返す。メタデータは任意で、宣言されたものは
    正しいことが前提（`MatrixService.spot_check` で抜き取り検査できる）。
    """

    def __init__(
        self,
        d: int,
        m: int,
        rule: Callable[[int, np.ndarray], np.ndarray],
        *,
        name: str = "",
        diagonal: bool = False,
        column_finite_bound: Optional[Callable[[int], int]] = None,
        support_start: Optional[Callable[[int], int]] = None,
        row_support: Optional[Callable[[int], np.ndarray]] = None,
        tail_decay_certificate: Optional[Callable[[int, float], int]] = None,
        nonnegative: bool = False,
        rank_one: Optional[RankOne] = None,
        exact_rule: Optional[Callable[[int, int], Fraction]] = None,
        row_horizon: Optional[int] = None,
        cache_size: int = 4096,
        cache_elements: int = 1 << 24,
    ):
        if diagonal and d != m:
            raise ValueError("対角ブロックは d = m の場合のみ指定できます")
        self.d = d
        self.m = m
        self.rule = rule
        self.name = name
        self.diagonal = diagonal
        self.column_finite_bound = column_finite_bound
        self.support_start = support_start
        self.row_support = row_support
        self.tail_decay_certificate = tail_decay_certificate
        self.nonnegative = nonnegative
        self.rank_one = rank_one
        self.exact_rule = exact_rule
        self.row_horizon = row_horizon
        self._cache_size = cache_size
        self._cache_elements = cache_elements
        self._cached_elements = 0
        self._cache: "OrderedDict[tuple, RowSlice]" = OrderedDict()
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"BlockMatrix(name={self.name!r}, d={self.d}, m={self.m})"

    @property
    def is_scalar(self) -> bool:
        return self.d == 1 and self.m == 1

    def evaluate(self, n: int, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        shape = (len(ks), self.d) if self.diagonal else (len(ks), self.m, self.d)
        if len(ks) == 0:
            return np.zeros(shape)
        values = np.asarray(self.rule(n, ks), dtype=float)
        return values.reshape(shape)

    def entry(self, n: int, k: int) -> np.ndarray:
        """A_{n,k} を m×d 行列で返す"""
        values = self.evaluate(n, np.array([k]))
        if self.diagonal:
            return np.diag(values[0])
        return values[0]

    def columns(self, n: int, hi: Optional[int]) -> np.ndarray:
        """行 n の評価対象列（hi 以下）"""
        if self.row_support is not None:
            ks = np.asarray(self.row_support(n), dtype=np.int64)
            return ks if hi is None else ks[ks <= hi]
        if hi is None:
            if self.column_finite_bound is None:
                raise ValueError("列の上限が必要です")
            hi = self.column_finite_bound(n)
        lo = self.support_start(n) if self.support_start is not None else 0
        if self.column_finite_bound is not None:
            hi = min(hi, self.column_finite_bound(n))
        return np.arange(max(lo, 0), hi + 1, dtype=np.int64)

    def row(self, n: int, hi: Optional[int]) -> RowSlice:
        """行 n の列 ≤ hi（None なら宣言された台全体）"""
        key = (n, hi)
        with self._lock:
            cached = self._cache.get(key)
            if cached is not None:
                self._cache.move_to_end(key)
                return cached
        ks = self.columns(n, hi)
        row = RowSlice(n, ks, self.evaluate(n, ks), self.diagonal, self.m, self.d)
        with self._lock:
            if key not in self._cache:
                self._cache[key] = row
                self._cached_elements += row.blocks.size
            while self._cache and (
                len(self._cache) > self._cache_size or self._cached_elements > self._cache_elements
            ):
                _, evicted = self._cache.popitem(last=False)
                self._cached_elements -= evicted.blocks.size
        return row

    def full_row(self, n: int, horizon: int) -> RowSlice:
        """疎な台が宣言された行は全体、それ以外は列 ≤ horizon"""
        if self.row_support is not None:
            return self.row(n, None)
        return self.row(n, horizon)

    def tail_is_zero(self, n: int, horizon: int) -> bool:
        """列 > horizon のブロックがすべて 0 と宣言されているか"""
        if self.row_support is not None:
            ks = np.asarray(self.row_support(n))
            return len(ks) == 0 or int(ks.max()) <= horizon
        return self.column_finite_bound is not None and self.column_finite_bound(n) <= horizon

    def clamp_horizon(self, horizon: int) -> int:
        """切断行列の有効な行範囲に horizon を制限"""
        if self.row_horizon is None:
            return horizon
        return min(horizon, self.row_horizon)


@dataclass(frozen=True)
class DoubleKernel:
    """四添字のスカラー行列 a_{(m,n),(p,q)}

    support((m, n)) は非零になり得る (ps, qs) を返し、rule((m, n), ps, qs) は
    その値を返す。
    """

    name: str
    rule: Callable[[Tuple[int, int], np.ndarray, np.ndarray], np.ndarray]
    support: Callable[[Tuple[int, int]], Tuple[np.ndarray, np.ndarray]]
    nonnegative: bool = False
