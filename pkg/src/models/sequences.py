from typing import Callable, FrozenSet, Iterable, Optional, Sequence

import numpy as np

from src.models.descriptors import DescriptorBase, IdealSpec

# 宣言できる系列空間。c_b などは有界版 c^b を表す
SEQUENCE_SPACES = frozenset({"ell_inf", "c", "c0", "c00", "c_b", "c0_b", "c00_b"})


def _as_vector(value, dim: int) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.shape != (dim,):
        raise ValueError(f"評価値の次元が {vec.shape} ですが ({dim},) が必要です")
    return vec


class SequenceView:
    """ℝ^d 値の系列 n → x_n と、その所属宣言

    評価は決定的かつ再入可能である必要がある。所属（有界性、c^b(X,ℐ) など）は
    有限個の値から推論せず、宣言として保持する。
    """

    __slots__ = ("_evaluator", "_vectorized", "dim", "limit", "ideal", "spaces", "support", "name")

    def __init__(
        self,
        evaluator: Callable[[int], object],
        dim: int = 1,
        *,
        vectorized: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        limit: Optional[Sequence[float]] = None,
        ideal: Optional[IdealSpec] = None,
        spaces: Iterable[str] = (),
        support: Optional[DescriptorBase] = None,
        name: str = "",
    ):
        spaces = frozenset(spaces)
        unknown = spaces - SEQUENCE_SPACES
        if unknown:
            raise ValueError(f"未知の系列空間です: {sorted(unknown)}")
        self._evaluator = evaluator
        self._vectorized = vectorized
        self.dim = dim
        self.limit = None if limit is None else _as_vector(limit, dim)
        self.ideal = ideal
        self.spaces: FrozenSet[str] = spaces
        self.support = support
        self.name = name

    def __call__(self, n: int) -> np.ndarray:
        return _as_vector(self._evaluator(n), self.dim)

    @property
    def bounded(self) -> bool:
        return bool(self.spaces & {"ell_inf", "c_b", "c0_b", "c00_b"})

    def sample(self, N: int) -> np.ndarray:
        """[0, N] 上の値を (N+1, d) 配列で返す"""
        if self._vectorized is not None:
            values = np.asarray(self._vectorized(np.arange(N + 1)), dtype=float)
            return values.reshape(N + 1, self.dim)
        out = np.empty((N + 1, self.dim))
        for n in range(N + 1):
            out[n] = self(n)
        return out

    def sample_at(self, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        if self._vectorized is not None:
            return np.asarray(self._vectorized(ns), dtype=float).reshape(len(ns), self.dim)
        return np.array([self(int(n)) for n in ns]).reshape(len(ns), self.dim)

    def declares(self, space: str, ideal: Optional[IdealSpec] = None) -> bool:
        """space（イデアル ideal に関する）への所属が宣言されているか"""
        if space not in self.spaces:
            # c^b ⊂ c などの包含は宣言から導く
            implied = {
                "c": {"c_b", "c0", "c0_b", "c00", "c00_b"},
                "c0": {"c0_b", "c00", "c00_b"},
                "c00": {"c00_b"},
                "c_b": {"c0_b", "c00_b"},
                "c0_b": {"c00_b"},
                "ell_inf": {"c_b", "c0_b", "c00_b"},
            }.get(space, set())
            if not (self.spaces & implied):
                return False
        if space == "ell_inf" or ideal is None:
            return True
        if self.ideal is None:
            return False
        # Fin はすべてのイデアルに含まれる
        return self.ideal == ideal or self.ideal.kind == "fin"

    @classmethod
    def from_array(cls, values: np.ndarray, **kwargs) -> "SequenceView":
        """配列で与えた系列。範囲外は 0"""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        length, dim = values.shape
        zero = np.zeros(dim)

        def evaluator(n: int) -> np.ndarray:
            return values[n] if n < length else zero

        def vectorized(ns: np.ndarray) -> np.ndarray:
            out = np.zeros((len(ns), dim))
            inside = ns < length
            out[inside] = values[ns[inside]]
            return out

        return cls(evaluator, dim, vectorized=vectorized, **kwargs)


class DoubleSequence:
    """二重系列 (m, n) → x_{m,n} と宣言された Pringsheim 極限"""

    __slots__ = ("_evaluator", "_vectorized", "dim", "p_limit", "name")

    def __init__(
        self,
        evaluator: Callable[[int, int], object],
        dim: int = 1,
        *,
        vectorized: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        p_limit: Optional[Sequence[float]] = None,
        name: str = "",
    ):
        self._evaluator = evaluator
        self._vectorized = vectorized
        self.dim = dim
        self.p_limit = None if p_limit is None else _as_vector(p_limit, dim)
        self.name = name

    def __call__(self, m: int, n: int) -> np.ndarray:
        return _as_vector(self._evaluator(m, n), self.dim)

    def sample_pairs(self, ms: np.ndarray, ns: np.ndarray) -> np.ndarray:
        ms = np.asarray(ms, dtype=np.int64)
        ns = np.asarray(ns, dtype=np.int64)
        if self._vectorized is not None:
            return np.asarray(self._vectorized(ms, ns), dtype=float).reshape(len(ms), self.dim)
        return np.array([self(int(m), int(n)) for m, n in zip(ms, ns)]).reshape(len(ms), self.dim)
