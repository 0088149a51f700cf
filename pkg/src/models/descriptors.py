"""ω の部分集合の記号表現とイデアル指定

各記述子は O(1) の所属判定、正確な prefix カウント、numpy マスク、
リテラル表記への変換を提供する。イデアル所属の判定は
`src.services.ideal_core.IdealService` が行う。
"""

import math
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

# 周期部分の周期の上限
PERIOD_CAP = 1 << 22


def nu2(n: int) -> int:
    """2進付値。ν₂(0) = 0 とする"""
    if n < 0:
        raise ValueError(f"自然数を指定してください: {n}")
    if n == 0:
        return 0
    return (n & -n).bit_length() - 1


def nu2_array(ns: np.ndarray) -> np.ndarray:
    """nu2 のベクトル版"""
    ns = np.asarray(ns, dtype=np.int64)
    low = ns & (-ns)
    out = np.zeros(ns.shape, dtype=np.int64)
    positive = low > 0
    out[positive] = np.rint(np.log2(low[positive])).astype(np.int64)
    return out


def pairing(r: int, i: int) -> int:
    """Cantor 対関数 p(r, i) = (r+i)(r+i+1)/2 + i"""
    s = r + i
    return s * (s + 1) // 2 + i


def unpairing(n: int) -> Tuple[int, int]:
    """pairing の逆写像 n → (r, i)"""
    s = (math.isqrt(8 * n + 1) - 1) // 2
    i = n - s * (s + 1) // 2
    return s - i, i


def _pairing_row_count(r: int, N: int) -> int:
    # p(r, i) = s(s+3)/2 - r, s = r + i
    bound = N + r
    s = (math.isqrt(8 * bound + 9) - 3) // 2
    while (s + 1) * (s + 4) // 2 <= bound:
        s += 1
    while s >= 0 and s * (s + 3) // 2 > bound:
        s -= 1
    return max(0, s - r + 1)


def _empty_generic() -> Tuple[int, np.ndarray]:
    return 1, np.zeros(1, dtype=bool)


def _tile(period: int, residues: np.ndarray, target: int) -> np.ndarray:
    return np.tile(residues, target // period)


class DescriptorBase(BaseModel):
    """記述子の共通インターフェース"""

    class Config:
        frozen = True

    def contains(self, n: int) -> bool:
        raise NotImplementedError

    def mask(self, N: int) -> np.ndarray:
        """[0, N] 上の所属を bool 配列で返す"""
        raise NotImplementedError

    def count_prefix(self, N: int) -> int:
        """|S ∩ [0, N]|"""
        if N < 0:
            return 0
        return int(self.mask(N).sum())

    def to_literal(self) -> str:
        raise NotImplementedError

    def generic(self) -> Optional[Tuple[int, np.ndarray]]:
        """疎な原子と有限部分を除いた周期部分 (周期, 剰余マスク)"""
        return _empty_generic()

    def sparse_occurrences(self, positive: bool = True) -> List[Tuple["NamedSparse", bool]]:
        """疎な原子の出現とその極性"""
        return []

    def structurally_contains(self, atom: "NamedSparse") -> bool:
        return False

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        """S ∩ atom が有限であることが構文的に分かるか"""
        return False

    def elements(self, N: int) -> np.ndarray:
        return np.flatnonzero(self.mask(N))


class FiniteSet(DescriptorBase):
    kind: Literal["finite"] = "finite"
    values: Tuple[int, ...] = ()

    @field_validator("values")
    @classmethod
    def _normalize(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("有限集合の要素は自然数である必要があります")
        return tuple(sorted(set(v)))

    def contains(self, n: int) -> bool:
        return n in self.values

    def mask(self, N: int) -> np.ndarray:
        out = np.zeros(N + 1, dtype=bool)
        idx = [v for v in self.values if v <= N]
        out[idx] = True
        return out

    def count_prefix(self, N: int) -> int:
        return sum(1 for v in self.values if v <= N)

    def to_literal(self) -> str:
        return "finite(" + ",".join(str(v) for v in self.values) + ")"

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        return True


class RangeSet(DescriptorBase):
    """閉区間 [lo, hi]"""

    kind: Literal["range"] = "range"
    lo: int = Field(..., ge=0)
    hi: int

    def contains(self, n: int) -> bool:
        return self.lo <= n <= self.hi

    def mask(self, N: int) -> np.ndarray:
        out = np.zeros(N + 1, dtype=bool)
        if self.hi >= self.lo and self.lo <= N:
            out[self.lo : min(self.hi, N) + 1] = True
        return out

    def count_prefix(self, N: int) -> int:
        if N < self.lo or self.hi < self.lo:
            return 0
        return min(self.hi, N) - self.lo + 1

    def to_literal(self) -> str:
        return f"range({self.lo},{self.hi})"

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        return True


class ArithmeticProgression(DescriptorBase):
    kind: Literal["ap"] = "ap"
    offset: int = Field(..., ge=0)
    step: int = Field(..., ge=1)

    def contains(self, n: int) -> bool:
        return n >= self.offset and (n - self.offset) % self.step == 0

    def mask(self, N: int) -> np.ndarray:
        out = np.zeros(N + 1, dtype=bool)
        out[self.offset :: self.step] = True
        return out

    def count_prefix(self, N: int) -> int:
        if N < self.offset:
            return 0
        return (N - self.offset) // self.step + 1

    def to_literal(self) -> str:
        return f"ap({self.offset},{self.step})"

    def generic(self) -> Optional[Tuple[int, np.ndarray]]:
        residues = np.zeros(self.step, dtype=bool)
        residues[self.offset % self.step] = True
        return self.step, residues


class NamedSparse(DescriptorBase):
    """密度0かつ逆数和有限の名前付き集合"""

    kind: Literal["sparse"] = "sparse"
    family: Literal["squares", "powers_of_two", "pairing_row"]
    r: int = Field(0, ge=0)

    def contains(self, n: int) -> bool:
        if self.family == "squares":
            return math.isqrt(n) ** 2 == n
        if self.family == "powers_of_two":
            return n > 0 and n & (n - 1) == 0
        return unpairing(n)[0] == self.r

    def count_prefix(self, N: int) -> int:
        if N < 0:
            return 0
        if self.family == "squares":
            return math.isqrt(N) + 1
        if self.family == "powers_of_two":
            return N.bit_length()
        return _pairing_row_count(self.r, N)

    def mask(self, N: int) -> np.ndarray:
        out = np.zeros(N + 1, dtype=bool)
        count = self.count_prefix(N)
        if count == 0:
            return out
        j = np.arange(count, dtype=np.int64)
        if self.family == "squares":
            out[j * j] = True
        elif self.family == "powers_of_two":
            out[np.left_shift(1, j)] = True
        else:
            s = self.r + j
            out[s * (s + 1) // 2 + j] = True
        return out

    def to_literal(self) -> str:
        if self.family == "squares":
            return "squares"
        if self.family == "powers_of_two":
            return "pow2"
        return f"pairrow({self.r})"

    def sparse_occurrences(self, positive: bool = True) -> List[Tuple["NamedSparse", bool]]:
        return [(self, positive)]

    def structurally_contains(self, atom: "NamedSparse") -> bool:
        return self == atom

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        # 異なる対関数の行は互いに素
        return (
            self.family == "pairing_row"
            and atom.family == "pairing_row"
            and self.r != atom.r
        )


class Nu2Level(DescriptorBase):
    """{n : ν₂(n) = t}（0 は t = 0 に属する）"""

    kind: Literal["nu2level"] = "nu2level"
    t: int = Field(..., ge=0)

    def contains(self, n: int) -> bool:
        return nu2(n) == self.t

    def mask(self, N: int) -> np.ndarray:
        return nu2_array(np.arange(N + 1)) == self.t

    def count_prefix(self, N: int) -> int:
        if N < 0:
            return 0
        count = N // (1 << self.t) - N // (1 << (self.t + 1))
        return count + (1 if self.t == 0 else 0)

    def to_literal(self) -> str:
        return f"nu2level({self.t})"

    def generic(self) -> Optional[Tuple[int, np.ndarray]]:
        period = 1 << (self.t + 1)
        if period > PERIOD_CAP:
            return None
        residues = np.zeros(period, dtype=bool)
        residues[1 << self.t] = True
        return period, residues

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        return atom.family == "powers_of_two"


class Nu2AtMost(DescriptorBase):
    """{n : ν₂(n) ≤ t}"""

    kind: Literal["nu2atmost"] = "nu2atmost"
    t: int = Field(..., ge=0)

    def contains(self, n: int) -> bool:
        return nu2(n) <= self.t

    def mask(self, N: int) -> np.ndarray:
        return nu2_array(np.arange(N + 1)) <= self.t

    def count_prefix(self, N: int) -> int:
        if N < 0:
            return 0
        return 1 + N - N // (1 << (self.t + 1))

    def to_literal(self) -> str:
        return f"nu2atmost({self.t})"

    def generic(self) -> Optional[Tuple[int, np.ndarray]]:
        period = 1 << (self.t + 1)
        if period > PERIOD_CAP:
            return None
        residues = np.ones(period, dtype=bool)
        residues[0] = False
        return period, residues

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        return atom.family == "powers_of_two"


class UnionSet(DescriptorBase):
    kind: Literal["union"] = "union"
    parts: Tuple["SetDescriptor", ...]

    def contains(self, n: int) -> bool:
        return any(p.contains(n) for p in self.parts)

    def mask(self, N: int) -> np.ndarray:
        out = np.zeros(N + 1, dtype=bool)
        for part in self.parts:
            out |= part.mask(N)
        return out

    def to_literal(self) -> str:
        return "union(" + ",".join(p.to_literal() for p in self.parts) + ")"

    def generic(self) -> Optional[Tuple[int, np.ndarray]]:
        generics = [p.generic() for p in self.parts]
        if any(g is None for g in generics):
            return None
        period = 1
        for p, _ in generics:
            period = math.lcm(period, p)
            if period > PERIOD_CAP:
                return None
        residues = np.zeros(period, dtype=bool)
        for p, r in generics:
            residues |= _tile(p, r, period)
        return period, residues

    def sparse_occurrences(self, positive: bool = True) -> List[Tuple["NamedSparse", bool]]:
        out: List[Tuple[NamedSparse, bool]] = []
        for part in self.parts:
            out.extend(part.sparse_occurrences(positive))
        return out

    def structurally_contains(self, atom: "NamedSparse") -> bool:
        return any(p.structurally_contains(atom) for p in self.parts)

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        return all(p.structurally_excludes(atom) for p in self.parts)


class ComplementSet(DescriptorBase):
    kind: Literal["compl"] = "compl"
    inner: "SetDescriptor"

    def contains(self, n: int) -> bool:
        return not self.inner.contains(n)

    def mask(self, N: int) -> np.ndarray:
        return ~self.inner.mask(N)

    def count_prefix(self, N: int) -> int:
        if N < 0:
            return 0
        return N + 1 - self.inner.count_prefix(N)

    def to_literal(self) -> str:
        return f"compl({self.inner.to_literal()})"

    def generic(self) -> Optional[Tuple[int, np.ndarray]]:
        g = self.inner.generic()
        if g is None:
            return None
        period, residues = g
        return period, ~residues

    def sparse_occurrences(self, positive: bool = True) -> List[Tuple["NamedSparse", bool]]:
        return self.inner.sparse_occurrences(not positive)

    def structurally_contains(self, atom: "NamedSparse") -> bool:
        return self.inner.structurally_excludes(atom)

    def structurally_excludes(self, atom: "NamedSparse") -> bool:
        return self.inner.structurally_contains(atom)


SetDescriptor = Annotated[
    Union[
        FiniteSet,
        RangeSet,
        ArithmeticProgression,
        NamedSparse,
        Nu2Level,
        Nu2AtMost,
        UnionSet,
        ComplementSet,
    ],
    Field(discriminator="kind"),
]

UnionSet.model_rebuild()
ComplementSet.model_rebuild()


IdealKind = Literal["fin", "density", "summable", "nu2", "generated"]


class IdealSpec(BaseModel):
    """サポートするイデアルの指定"""

    kind: IdealKind
    generators: Tuple[SetDescriptor, ...] = ()

    class Config:
        frozen = True

    @field_validator("generators")
    @classmethod
    def _check_generators(cls, v, info):
        if info.data.get("kind") == "generated" and not v:
            raise ValueError("generated イデアルには生成集合が必要です")
        return v

    @property
    def countably_generated(self) -> bool:
        return self.kind in ("fin", "nu2", "generated")

    @property
    def tall(self) -> bool:
        return self.kind in ("density", "summable")

    def generator(self, j: int) -> DescriptorBase:
        """増大する生成列の j 番目 Q_j"""
        if self.kind == "fin":
            return RangeSet(lo=0, hi=j)
        if self.kind == "nu2":
            return Nu2AtMost(t=j)
        if self.kind == "generated":
            # 生成集合の累積和に有限区間を加えて増大列にする
            listed = self.generators[: min(j, len(self.generators) - 1) + 1]
            return UnionSet(parts=(*listed, RangeSet(lo=0, hi=j)))
        raise ValueError(f"{self.kind} は可算生成ではありません")

    def generator_index(self, n: int) -> int:
        """n ∈ Q_j となる最小の j"""
        if self.kind == "fin":
            return n
        if self.kind == "nu2":
            return nu2(n)
        if self.kind == "generated":
            for j, q in enumerate(self.generators):
                if q.contains(n):
                    return min(j, n)
            return n
        raise ValueError(f"{self.kind} は可算生成ではありません")

    def generator_index_array(self, N: int) -> np.ndarray:
        ns = np.arange(N + 1, dtype=np.int64)
        if self.kind == "fin":
            return ns
        if self.kind == "nu2":
            return nu2_array(ns)
        if self.kind == "generated":
            index = ns.copy()
            found = np.zeros(N + 1, dtype=bool)
            for j, q in enumerate(self.generators):
                hit = q.mask(N) & ~found
                index[hit] = np.minimum(j, ns[hit])
                found |= hit
            return index
        raise ValueError(f"{self.kind} は可算生成ではありません")

    def cover(self) -> DescriptorBase:
        """明示された生成集合の和集合"""
        if self.kind != "generated":
            raise ValueError(f"{self.kind} には明示された生成集合がありません")
        return UnionSet(parts=self.generators)

    def to_literal(self) -> str:
        if self.kind == "generated":
            return "generated[" + ",".join(g.to_literal() for g in self.generators) + "]"
        return self.kind
