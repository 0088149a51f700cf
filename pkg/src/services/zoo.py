"""名前付き行列・二重カーネル・二重系列・系列族のビルダー

すべてのビルダーは CLI と共通のリテラル構文（例: ``euler(1)``,
``random(7,banded)``, ``spiky_density(5,100,squares)``）で指定できる。
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.config.settings import Settings, get_settings
from src.models.descriptors import DescriptorBase, IdealSpec
from src.models.errors import InvalidFamily, LiteralParseError, UnknownBuiltin
from src.models.matrices import BlockMatrix, DoubleKernel, RankOne
from src.models.sequences import DoubleSequence, SequenceView
from src.services.ideal_core import IdealService
from src.services.literals import CallNode, descriptor_from_node, node_to_literal, parse_call

logger = logging.getLogger(__name__)

BUILTIN_MATRICES = [
    "cesaro",
    "euler(q)",
    "riesz(ones|linear|harmonic)",
    "diagonal(T)",
    "tail_projection(K)",
    "identity_plus_tail(K)",
    "rank_one(scalar, A0)",
    "random(seed, banded|dense|positive[, d, m])",
    "identity[(d)]",
    "zero[(d, m)]",
    "alternating",
    "square_decay",
    "column0",
    "column0_decay",
    "lower_ones",
    "log_growth",
    "q0_blowup",
]
BUILTIN_KERNELS = ["double_cesaro", "double_identity", "double_ones"]
BUILTIN_DOUBLES = [
    "corner_decay",
    "geometric_corner",
    "constant(c)",
    "row_zero",
    "checkerboard",
    "diagonal_ones",
    "shifted_limit(c)",
]
BUILTIN_FAMILIES = [
    "convergent(eta, geometric|harmonic|sqrt)",
    "spiky_density(eta, spike, S)",
    "c00_supported(S)",
    "bounded_divergent",
    "unbounded_Iconvergent(eta, S)",
    "coordinates",
]


@dataclass(frozen=True)
class NamedMatrix:
    name: str
    matrix: BlockMatrix
    provenance: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class NamedDouble:
    name: str
    sequence: DoubleSequence
    provenance: str


# ---- スカラー行列の部品 -----------------------------------------------------


def _scalar(rule: Callable[[int, np.ndarray], np.ndarray]) -> Callable[[int, np.ndarray], np.ndarray]:
    def block_rule(n: int, ks: np.ndarray) -> np.ndarray:
        return np.asarray(rule(n, ks), dtype=float).reshape(len(ks), 1, 1)

    return block_rule


def _lower(values: Callable[[int, np.ndarray], np.ndarray]) -> Callable[[int, np.ndarray], np.ndarray]:
    """k ≤ n の下三角部分だけを残す"""

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        return np.where(ks <= n, values(n, ks), 0.0)

    return rule


def _lower_triangular(
    name: str,
    values: Callable[[int, np.ndarray], np.ndarray],
    *,
    exact: Optional[Callable[[int, int], Fraction]] = None,
    nonnegative: bool = True,
) -> BlockMatrix:
    rule = _lower(values)
    return BlockMatrix(
        1,
        1,
        _scalar(rule),
        name=name,
        column_finite_bound=lambda n: n,
        nonnegative=nonnegative,
        rank_one=RankOne(scalar=rule, A0=np.ones((1, 1))),
        exact_rule=exact,
    )


@lru_cache(maxsize=8)
def _log_factorials(size: int) -> np.ndarray:
    out = np.zeros(size + 1)
    out[1:] = np.cumsum(np.log(np.arange(1, size + 1)))
    out.setflags(write=False)
    return out


def _log_factorial(n: int) -> np.ndarray:
    size = 1 << max(10, (n + 1).bit_length())
    return _log_factorials(size)


def cesaro() -> NamedMatrix:
    matrix = _lower_triangular(
        "cesaro",
        lambda n, ks: np.full(len(ks), 1.0 / (n + 1)),
        exact=lambda n, k: Fraction(1, n + 1) if k <= n else Fraction(0),
    )
    return NamedMatrix("cesaro", matrix, "算術平均 a_{n,k} = 1/(n+1)（k ≤ n）")


def euler(q: float) -> NamedMatrix:
    """Euler 行列 E_q: a_{n,k} = C(n,k) q^{n-k} / (1+q)^n"""
    if q < 0:
        raise LiteralParseError(f"euler の q は 0 以上である必要があります: {q}")
    p = 1.0 / (1.0 + q)

    def values(n: int, ks: np.ndarray) -> np.ndarray:
        if q == 0:
            return (ks == n).astype(float)
        lf = _log_factorial(n)
        k = np.clip(ks, 0, n)
        logs = lf[n] - lf[k] - lf[n - k] + k * math.log(p) + (n - k) * math.log1p(-p)
        return np.exp(logs)

    fq = Fraction(q).limit_denominator(10**6)

    def exact(n: int, k: int) -> Fraction:
        if k > n:
            return Fraction(0)
        return math.comb(n, k) * fq ** (n - k) / (1 + fq) ** n

    matrix = _lower_triangular(f"euler({q:g})", values, exact=exact)
    return NamedMatrix(matrix.name, matrix, "Euler 平均（二項分布の重み）", {"q": q})


_RIESZ_WEIGHTS = {
    "ones": (lambda k: np.ones(len(k)), lambda k: Fraction(1)),
    "linear": (lambda k: k + 1.0, lambda k: Fraction(k + 1)),
    "harmonic": (lambda k: 1.0 / (k + 1.0), lambda k: Fraction(1, k + 1)),
}


def riesz(weights: str) -> NamedMatrix:
    """Riesz 平均 a_{n,k} = p_k / P_n（k ≤ n）"""
    if weights not in _RIESZ_WEIGHTS:
        raise UnknownBuiltin(f"未知の Riesz 重みです: {weights}")
    weight, exact_weight = _RIESZ_WEIGHTS[weights]

    def values(n: int, ks: np.ndarray) -> np.ndarray:
        total = math.fsum(weight(np.arange(n + 1)))
        return weight(ks.astype(float)) / total

    def exact(n: int, k: int) -> Fraction:
        if k > n:
            return Fraction(0)
        return exact_weight(k) / sum((exact_weight(j) for j in range(n + 1)), Fraction(0))

    matrix = _lower_triangular(f"riesz({weights})", values, exact=exact)
    return NamedMatrix(matrix.name, matrix, "Riesz 重み付き平均", {"weights": weights})


def diagonal(T: np.ndarray, name: Optional[str] = None) -> NamedMatrix:
    """A_{n,k} = T（n = k）, それ以外 0"""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    m, d = T.shape

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        return (ks == n).astype(float)[:, None, None] * T

    scalar_rule = lambda n, ks: (ks == n).astype(float)  # noqa: E731
    exact = None
    if T.size == 1:
        t = Fraction(float(T[0, 0])).limit_denominator(10**9)
        exact = lambda n, k: t if n == k else Fraction(0)  # noqa: E731
    label = name or f"diagonal({node_to_literal(T.tolist())})"
    matrix = BlockMatrix(
        d,
        m,
        rule,
        name=label,
        column_finite_bound=lambda n: n,
        support_start=lambda n: n,
        row_support=lambda n: np.array([n], dtype=np.int64),
        nonnegative=bool((T >= 0).all()),
        rank_one=RankOne(scalar=scalar_rule, A0=T),
        exact_rule=exact,
    )
    return NamedMatrix(label, matrix, "対角行列 A_{n,n} = T", {"T": T.tolist()})


def tail_projection(K: int) -> NamedMatrix:
    """ℝ^{K+1} 上の尾部射影 A_{n,0} = P_{>n}（n < K）, A_{n,k} = 0（k > 0）

    ‖A_{n,0}‖ = 1 だが各 x について A_{n,0}x → 0。
    """
    if K < 1:
        raise LiteralParseError(f"切断サイズ K は 1 以上である必要があります: {K}")
    d = K + 1
    coords = np.arange(d)

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ks), d))
        out[ks == 0] = (coords > n).astype(float)
        return out

    matrix = BlockMatrix(
        d,
        d,
        rule,
        name=f"tail_projection({K})",
        diagonal=True,
        column_finite_bound=lambda n: 0,
        nonnegative=True,
        row_horizon=K - 1,
    )
    return NamedMatrix(matrix.name, matrix, "ℓ₂ 上の尾部射影の切断（K 次元）", {"K": K})


def identity_plus_tail(K: int) -> NamedMatrix:
    """ℝ^K 上の Id + B（B_{n,0} = P_{>n}, B_{n,k} = −x_{n+k}e_{n+k}）

    列の有限性は宣言しない（変換は証明書なしになる）。
    """
    if K < 1:
        raise LiteralParseError(f"切断サイズ K は 1 以上である必要があります: {K}")
    coords = np.arange(K)

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ks), K))
        out[ks == 0] += (coords > n).astype(float)
        out[ks == n] += 1.0
        rows = np.flatnonzero((ks > 0) & (n + ks < K))
        out[rows, n + ks[rows]] -= 1.0
        return out

    matrix = BlockMatrix(K, K, rule, name=f"identity_plus_tail({K})", diagonal=True)
    note = "ℓ₂ 上の Id + B の切断（K 次元）。column_finite_bound と nonnegative を宣言しないため変換は証明書なし"
    return NamedMatrix(matrix.name, matrix, note, {"K": K})


def rank_one(inner: NamedMatrix, A0: np.ndarray) -> NamedMatrix:
    """A_{n,k} = a_{n,k}·A₀"""
    base = inner.matrix
    if not base.is_scalar:
        raise LiteralParseError("rank_one の第1引数はスカラー行列である必要があります")
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    m, d = A0.shape

    def scalar(n: int, ks: np.ndarray) -> np.ndarray:
        return base.evaluate(n, ks).reshape(-1)

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        return scalar(n, ks)[:, None, None] * A0

    label = f"rank_one({inner.name},{node_to_literal(A0.tolist())})"
    matrix = BlockMatrix(
        d,
        m,
        rule,
        name=label,
        column_finite_bound=base.column_finite_bound,
        support_start=base.support_start,
        row_support=base.row_support,
        tail_decay_certificate=base.tail_decay_certificate,
        nonnegative=base.nonnegative and bool((A0 >= 0).all()),
        rank_one=RankOne(scalar=scalar, A0=A0),
        row_horizon=base.row_horizon,
    )
    return NamedMatrix(label, matrix, "階数1構造 a_{n,k}·A₀", {"A0": A0.tolist()})


_RANDOM_BAND = 8


def random_matrix(seed: int, profile: str, d: int = 1, m: int = 1) -> NamedMatrix:
    """行ごとに独立なシードを持つ乱数行列（行の絶対値和 = 1）"""
    if profile not in ("banded", "dense", "positive"):
        raise UnknownBuiltin(f"未知の乱数行列プロファイルです: {profile}")

    def start(n: int) -> int:
        return 0 if profile == "dense" else max(0, n - _RANDOM_BAND)

    def full_row(n: int) -> np.ndarray:
        rng = np.random.default_rng([seed, n])
        values = rng.standard_normal((n - start(n) + 1, m, d))
        if profile == "positive":
            values = np.abs(values)
        return values / math.fsum(np.abs(values).ravel())

    def rule(n: int, ks: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ks), m, d))
        inside = (ks >= start(n)) & (ks <= n)
        out[inside] = full_row(n)[ks[inside] - start(n)]
        return out

    label = f"random({seed},{profile})" if d == m == 1 else f"random({seed},{profile},{d},{m})"
    matrix = BlockMatrix(
        d,
        m,
        rule,
        name=label,
        column_finite_bound=lambda n: n,
        support_start=start,
        nonnegative=profile == "positive",
    )
    return NamedMatrix(label, matrix, "乱数行列", {"seed": seed, "profile": profile, "d": d, "m": m})


def _simple(name: str) -> NamedMatrix:
    if name == "alternating":
        matrix = _lower_triangular(
            name,
            lambda n, ks: np.where(ks % 2 == 0, 1.0, -1.0) / (n + 1),
            exact=lambda n, k: Fraction((-1) ** k, n + 1) if k <= n else Fraction(0),
            nonnegative=False,
        )
        return NamedMatrix(name, matrix, "a_{n,k} = (−1)^k/(n+1)（k ≤ n）")
    if name == "square_decay":
        matrix = _lower_triangular(
            name,
            lambda n, ks: np.full(len(ks), 1.0 / (n + 1) ** 2),
            exact=lambda n, k: Fraction(1, (n + 1) ** 2) if k <= n else Fraction(0),
        )
        return NamedMatrix(name, matrix, "a_{n,k} = 1/(n+1)²（k ≤ n）")
    if name == "lower_ones":
        matrix = _lower_triangular(
            name,
            lambda n, ks: np.ones(len(ks)),
            exact=lambda n, k: Fraction(1) if k <= n else Fraction(0),
        )
        return NamedMatrix(name, matrix, "a_{n,k} = 1（k ≤ n）")
    if name == "log_growth":
        matrix = _lower_triangular(name, lambda n, ks: np.full(len(ks), math.log(n + 2) / (n + 1)))
        return NamedMatrix(name, matrix, "行和 log(n+2) の行列")
    if name in ("column0", "column0_decay"):
        decay = name == "column0_decay"

        def rule(n: int, ks: np.ndarray) -> np.ndarray:
            value = 1.0 / (n + 1) if decay else 1.0
            return np.where(ks == 0, value, 0.0)

        matrix = BlockMatrix(
            1,
            1,
            _scalar(rule),
            name=name,
            column_finite_bound=lambda n: 0,
            nonnegative=True,
            rank_one=RankOne(scalar=rule, A0=np.ones((1, 1))),
            exact_rule=lambda n, k: (Fraction(1, n + 1) if decay else Fraction(1)) if k == 0 else Fraction(0),
        )
        note = "第0列のみ 1/(n+1)" if decay else "第0列のみ 1"
        return NamedMatrix(name, matrix, note)
    if name == "q0_blowup":

        def rule(n: int, ks: np.ndarray) -> np.ndarray:
            scale = float(n + 1) if (n == 0 or n % 2 == 1) else 1.0
            return np.where(ks == n, scale, 0.0)

        matrix = BlockMatrix(
            1,
            1,
            _scalar(rule),
            name=name,
            column_finite_bound=lambda n: n,
            support_start=lambda n: n,
            row_support=lambda n: np.array([n], dtype=np.int64),
            nonnegative=True,
        )
        return NamedMatrix(name, matrix, "Q₀ の行（0 と奇数）でのみ発散する対角行列")
    raise UnknownBuiltin(f"未知の組み込み行列です: {name}")


def _int_param(node: CallNode, index: int, default: Optional[int] = None) -> int:
    if index >= len(node.args):
        if default is None:
            raise LiteralParseError(f"{node.name} の引数が足りません")
        return default
    value = node.args[index]
    if not isinstance(value, int):
        raise LiteralParseError(f"{node.name} の第{index + 1}引数は整数である必要があります: {value!r}")
    return value


def _ident_param(node: CallNode, index: int) -> str:
    if index >= len(node.args) or not isinstance(node.args[index], CallNode):
        raise LiteralParseError(f"{node.name} の第{index + 1}引数は名前である必要があります")
    return node.args[index].name


def _matrix_param(value: Any) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.array([[float(value)]])
    if isinstance(value, list):
        array = np.asarray(value, dtype=float)
        return np.diag(array) if array.ndim == 1 else array
    raise LiteralParseError(f"行列リテラルではありません: {value!r}")


def matrix_from_node(node: Any) -> NamedMatrix:
    if not isinstance(node, CallNode):
        raise LiteralParseError(f"行列リテラルではありません: {node!r}")
    name = node.name
    if name == "cesaro":
        return cesaro()
    if name == "euler":
        if not node.args or not isinstance(node.args[0], (int, float)):
            raise LiteralParseError("euler には数値の引数 q が必要です")
        return euler(float(node.args[0]))
    if name == "riesz":
        return riesz(_ident_param(node, 0) if node.args else "ones")
    if name == "diagonal":
        if len(node.args) != 1:
            raise LiteralParseError("diagonal の引数は行列1つです")
        return diagonal(_matrix_param(node.args[0]))
    if name == "identity":
        dim = _int_param(node, 0, 1)
        return diagonal(np.eye(dim), name="identity" if dim == 1 else f"identity({dim})")
    if name == "zero":
        d = _int_param(node, 0, 1)
        m = _int_param(node, 1, d)
        named = diagonal(np.zeros((m, d)), name="zero" if d == m == 1 else f"zero({d},{m})")
        return named
    if name == "tail_projection":
        return tail_projection(_int_param(node, 0))
    if name == "identity_plus_tail":
        return identity_plus_tail(_int_param(node, 0))
    if name == "rank_one":
        if len(node.args) != 2:
            raise LiteralParseError("rank_one の引数は (スカラー行列, A₀) です")
        return rank_one(matrix_from_node(node.args[0]), _matrix_param(node.args[1]))
    if name == "random":
        return random_matrix(
            _int_param(node, 0),
            _ident_param(node, 1),
            _int_param(node, 2, 1),
            _int_param(node, 3, 1),
        )
    return _simple(name)


def builtin_matrix(literal: str) -> NamedMatrix:
    """組み込み行列をリテラルから構築"""
    named = matrix_from_node(parse_call(literal))
    logger.debug(f"組み込み行列を構築しました: {named.name}")
    return named


# ---- 二重カーネルと二重系列 -------------------------------------------------


def _rectangle(mn: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    m, n = mn
    ps, qs = np.meshgrid(np.arange(m + 1), np.arange(n + 1), indexing="ij")
    return ps.ravel(), qs.ravel()


def builtin_kernel(literal: str) -> DoubleKernel:
    """rh_check 用の二重行列カーネル"""
    node = parse_call(literal)
    name = node.name if isinstance(node, CallNode) else str(node)
    if name == "double_cesaro":
        return DoubleKernel(
            name,
            rule=lambda mn, ps, qs: np.full(len(ps), 1.0 / ((mn[0] + 1) * (mn[1] + 1))),
            support=_rectangle,
            nonnegative=True,
        )
    if name == "double_identity":
        return DoubleKernel(
            name,
            rule=lambda mn, ps, qs: np.ones(len(ps)),
            support=lambda mn: (np.array([mn[0]]), np.array([mn[1]])),
            nonnegative=True,
        )
    if name == "double_ones":
        return DoubleKernel(
            name,
            rule=lambda mn, ps, qs: np.ones(len(ps)),
            support=_rectangle,
            nonnegative=True,
        )
    raise UnknownBuiltin(f"未知の二重カーネルです: {literal}")


def _double(name: str, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], p_limit, note: str) -> NamedDouble:
    def evaluator(m: int, n: int) -> float:
        return float(fn(np.array([m]), np.array([n]))[0])

    sequence = DoubleSequence(evaluator, 1, vectorized=fn, p_limit=p_limit, name=name)
    return NamedDouble(name, sequence, note)


def builtin_double(literal: str) -> NamedDouble:
    """Pringsheim 極限が既知（または存在しない）二重系列"""
    node = parse_call(literal)
    if not isinstance(node, CallNode):
        raise LiteralParseError(f"二重系列リテラルではありません: {literal!r}")
    name = node.name
    c = float(node.args[0]) if node.args and isinstance(node.args[0], (int, float)) else 1.0
    if name == "corner_decay":
        return _double(name, lambda m, n: 1.0 / (np.minimum(m, n) + 1.0), [0.0], "1/(min(m,n)+1)")
    if name == "geometric_corner":
        return _double(name, lambda m, n: 1.0 + np.exp2(-np.minimum(m, n).astype(float)), [1.0], "1 + 2^{−min(m,n)}")
    if name == "constant":
        return _double(f"constant({c:g})", lambda m, n: np.full(len(m), c), [c], "定数")
    if name == "row_zero":
        return _double(name, lambda m, n: (m == 0).astype(float), [0.0], "第0行のみ 1")
    if name == "checkerboard":
        return _double(name, lambda m, n: np.where((m + n) % 2 == 0, 1.0, -1.0), None, "(−1)^{m+n}")
    if name == "diagonal_ones":
        return _double(name, lambda m, n: (m == n).astype(float), None, "対角のみ 1")
    if name == "shifted_limit":
        return _double(f"shifted_limit({c:g})", lambda m, n: c + 1.0 / (m + n + 1.0), [c], "c + 1/(m+n+1)")
    raise UnknownBuiltin(f"未知の二重系列です: {literal}")


# ---- 系列族 ------------------------------------------------------------------


_RATES = {
    "geometric": lambda n: np.exp2(-np.minimum(n, 1000).astype(float)),
    "harmonic": lambda n: 1.0 / (n + 1.0),
    "sqrt": lambda n: 1.0 / np.sqrt(n + 1.0),
}


@dataclass(frozen=True)
class NamedFamily:
    """宣言された ℐ 極限を持つ系列の族

    members(count, seed) は決定的に count 個の系列を返す。
    """

    name: str
    ideal: IdealSpec
    members: Callable[[int, int], List[SequenceView]]
    limit_declared: bool = True


def _view(
    fn: Callable[[np.ndarray], np.ndarray],
    dim: int,
    *,
    limit: Optional[np.ndarray],
    ideal: Optional[IdealSpec],
    spaces: Tuple[str, ...],
    support: Optional[DescriptorBase] = None,
    name: str = "",
) -> SequenceView:
    def evaluator(n: int) -> np.ndarray:
        return fn(np.array([n], dtype=np.int64))[0]

    return SequenceView(
        evaluator,
        dim,
        vectorized=fn,
        limit=limit,
        ideal=ideal,
        spaces=spaces,
        support=support,
        name=name,
    )


def _member_mask(S: DescriptorBase, ns: np.ndarray) -> np.ndarray:
    if len(ns) == 0:
        return np.zeros(0, dtype=bool)
    return S.mask(int(ns.max()))[ns]


class FamilyBuilder:
    """系列族を宣言とともに構築し、宣言をイデアル所属で検証する"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.ideal_service = IdealService(self.settings)

    def _require_member(self, ideal: IdealSpec, S: DescriptorBase, role: str) -> None:
        status = self.ideal_service.ideal_member(ideal, S).status
        if status != "In":
            raise InvalidFamily(f"{role} {S.to_literal()} は {ideal.to_literal()} に属しません（{status}）")

    def convergent(self, eta: Optional[float], rate: str, dim: int = 1) -> NamedFamily:
        if rate not in _RATES:
            raise UnknownBuiltin(f"未知の収束レートです: {rate}")
        rate_fn = _RATES[rate]
        fin = IdealSpec(kind="fin")

        def members(count: int, seed: int) -> List[SequenceView]:
            rng = np.random.default_rng([seed, 1])
            out = []
            for i in range(count):
                limit = np.full(dim, eta) if eta is not None else rng.uniform(-1, 1, dim)
                scale = rng.uniform(-1, 1, dim)
                fn = lambda ns, limit=limit, scale=scale: limit + rate_fn(ns)[:, None] * scale  # noqa: E731
                out.append(
                    _view(fn, dim, limit=limit, ideal=fin, spaces=("c_b",), name=f"convergent[{rate}]#{i}")
                )
            return out

        return NamedFamily(f"convergent({rate})", fin, members)

    def spiky(
        self, eta: Optional[float], spike: Optional[float], spikes: DescriptorBase, ideal: IdealSpec, dim: int = 1
    ) -> NamedFamily:
        self._require_member(ideal, spikes, "スパイク集合")

        def members(count: int, seed: int) -> List[SequenceView]:
            rng = np.random.default_rng([seed, 2])
            out = []
            for i in range(count):
                limit = np.full(dim, eta) if eta is not None else rng.uniform(-1, 1, dim)
                height = np.full(dim, spike) if spike is not None else limit + 1.0

                def fn(ns: np.ndarray, limit=limit, height=height) -> np.ndarray:
                    on = _member_mask(spikes, ns)
                    return np.where(on[:, None], height, limit)

                out.append(
                    _view(
                        fn,
                        dim,
                        limit=limit,
                        ideal=ideal,
                        spaces=("c_b",),
                        name=f"spiky[{spikes.to_literal()}]#{i}",
                    )
                )
            return out

        return NamedFamily(f"spiky_density({spikes.to_literal()})", ideal, members)

    def c00_supported(self, support: DescriptorBase, ideal: IdealSpec, dim: int = 1) -> NamedFamily:
        self._require_member(ideal, support, "台")

        def members(count: int, seed: int) -> List[SequenceView]:
            out = []
            for i in range(count):

                def fn(ns: np.ndarray, i=i) -> np.ndarray:
                    on = _member_mask(support, ns)
                    top = int(ns.max()) if len(ns) else 0
                    # 系列ごとに固定した符号列 ε_0, ε_1, …
                    signs = np.where(np.random.default_rng([seed, 3, i]).random(top + 1) < 0.5, 1.0, -1.0)
                    return np.where(on, signs[ns], 0.0)[:, None] * np.ones(dim)

                out.append(
                    _view(
                        fn,
                        dim,
                        limit=np.zeros(dim),
                        ideal=ideal,
                        spaces=("c00_b",),
                        support=support,
                        name=f"c00[{support.to_literal()}]#{i}",
                    )
                )
            return out

        return NamedFamily(f"c00_supported({support.to_literal()})", ideal, members)

    def bounded_divergent(self, ideal: IdealSpec, dim: int = 1) -> NamedFamily:
        def members(count: int, seed: int) -> List[SequenceView]:
            out = []
            for i in range(count):
                fn = lambda ns, i=i: np.where((ns + i) % 2 == 0, 1.0, -1.0)[:, None] * np.ones(dim)  # noqa: E731
                out.append(_view(fn, dim, limit=None, ideal=None, spaces=("ell_inf",), name=f"bounded_divergent#{i}"))
            return out

        return NamedFamily("bounded_divergent", ideal, members, limit_declared=False)

    def unbounded(self, eta: float, blowup: DescriptorBase, ideal: IdealSpec, dim: int = 1) -> NamedFamily:
        self._require_member(ideal, blowup, "発散集合")

        def members(count: int, seed: int) -> List[SequenceView]:
            out = []
            for i in range(count):

                def fn(ns: np.ndarray) -> np.ndarray:
                    on = _member_mask(blowup, ns)
                    return np.where(on, ns + 1.0, eta)[:, None] * np.ones(dim)

                out.append(
                    _view(
                        fn,
                        dim,
                        limit=np.full(dim, eta),
                        ideal=ideal,
                        spaces=("c",),
                        name=f"unbounded[{blowup.to_literal()}]#{i}",
                    )
                )
            return out

        return NamedFamily(f"unbounded_Iconvergent({blowup.to_literal()})", ideal, members)


def _number(node: CallNode, index: int, default: Optional[float] = None) -> Optional[float]:
    if index >= len(node.args):
        return default
    value = node.args[index]
    if not isinstance(value, (int, float)):
        raise LiteralParseError(f"{node.name} の第{index + 1}引数は数値である必要があります: {value!r}")
    return float(value)


def builtin_family(
    literal: str, ideal: Optional[IdealSpec] = None, dim: int = 1, settings: Optional[Settings] = None
) -> NamedFamily:
    """系列族をリテラルから構築"""
    node = parse_call(literal)
    if not isinstance(node, CallNode):
        raise LiteralParseError(f"系列族リテラルではありません: {literal!r}")
    builder = FamilyBuilder(settings)
    name = node.name
    if name == "convergent":
        eta = _number(node, 0)
        rate = node.args[1].name if len(node.args) > 1 and isinstance(node.args[1], CallNode) else "harmonic"
        return builder.convergent(eta, rate, dim)
    if name == "spiky_density":
        spikes = descriptor_from_node(node.args[2]) if len(node.args) > 2 else descriptor_from_node(CallNode("squares"))
        return builder.spiky(_number(node, 0, 5.0), _number(node, 1, 100.0), spikes, ideal or IdealSpec(kind="density"), dim)
    if name == "c00_supported":
        if not node.args:
            raise LiteralParseError("c00_supported には台の記述子が必要です")
        return builder.c00_supported(descriptor_from_node(node.args[0]), ideal or IdealSpec(kind="density"), dim)
    if name == "bounded_divergent":
        return builder.bounded_divergent(ideal or IdealSpec(kind="fin"), dim)
    if name in ("unbounded_Iconvergent", "unbounded_iconvergent"):
        if len(node.args) < 2:
            raise LiteralParseError("unbounded_Iconvergent の引数は (η, 集合) です")
        return builder.unbounded(_number(node, 0), descriptor_from_node(node.args[1]), ideal or IdealSpec(kind="density"), dim)
    if name == "coordinates":
        return NamedFamily("coordinates", IdealSpec(kind="fin"), lambda count, seed: [coordinate_sequence(dim)])
    raise UnknownBuiltin(f"未知の系列族です: {name}")


def coordinate_sequence(dim: int) -> SequenceView:
    """x_k = e_k（k < dim）, それ以外 0"""

    def fn(ns: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ns), dim))
        inside = ns < dim
        out[np.flatnonzero(inside), ns[inside]] = 1.0
        return out

    return _view(fn, dim, limit=np.zeros(dim), ideal=IdealSpec(kind="fin"), spaces=("c0_b",), name="coordinates")