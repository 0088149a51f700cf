from typing import Dict, Tuple

from pydantic import BaseModel, Field

from src.models.descriptors import (
    FiniteSet,
    NamedSparse,
    Nu2AtMost,
    Nu2Level,
    RangeSet,
    SetDescriptor,
)


class SampleSuite(BaseModel):
    """全称条件をサンプル上で検証するための標準サンプル集"""

    e_samples: Tuple[SetDescriptor, ...] = Field(
        default=(), description="イデアルに属する標準の添字集合 E"
    )
    spike_sets: Tuple[SetDescriptor, ...] = Field(
        default=(), description="挙動チェックのスパイク系列に使う集合"
    )
    use_generators: bool = Field(
        default=False, description="生成集合そのものをサンプルに加えるか"
    )
    description: str = Field(default="", description="サンプル集の説明")

    class Config:
        """Pydantic設定"""

        frozen = True  # イミュータブルにする


_TALL_SAMPLES = (
    NamedSparse(family="squares"),
    NamedSparse(family="powers_of_two"),
    NamedSparse(family="pairing_row", r=0),
    NamedSparse(family="pairing_row", r=1),
    NamedSparse(family="pairing_row", r=2),
)

_SUITES: Dict[str, SampleSuite] = {
    "fin": SampleSuite(
        e_samples=(FiniteSet(values=(0,)), RangeSet(lo=0, hi=3)),
        spike_sets=(FiniteSet(values=(0, 1, 2)),),
        description="有限集合",
    ),
    "density": SampleSuite(
        e_samples=_TALL_SAMPLES,
        spike_sets=(NamedSparse(family="powers_of_two"),),
        description="平方数・2の冪・対関数の行",
    ),
    "summable": SampleSuite(
        e_samples=_TALL_SAMPLES,
        spike_sets=(NamedSparse(family="powers_of_two"),),
        description="平方数・2の冪・対関数の行",
    ),
    "nu2": SampleSuite(
        e_samples=(Nu2Level(t=0), Nu2AtMost(t=1)),
        spike_sets=(Nu2Level(t=0),),
        description="2進付値の水準集合",
    ),
    "generated": SampleSuite(
        use_generators=True,
        description="生成集合",
    ),
}


def get_sample_suite_for_ideal(kind: str) -> SampleSuite:
    """イデアルの種類に対応するサンプル集を取得"""
    try:
        return _SUITES[kind]
    except KeyError:
        raise ValueError(f"未知のイデアルです: {kind}")
