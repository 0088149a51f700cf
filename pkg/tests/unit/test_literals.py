import numpy as np
import pytest

from src.models.descriptors import (
    ArithmeticProgression,
    ComplementSet,
    FiniteSet,
    IdealSpec,
    NamedSparse,
    Nu2AtMost,
    RangeSet,
    UnionSet,
)
from src.models.errors import LiteralParseError
from src.services.literals import CallNode, node_to_literal, parse_call, parse_descriptor, parse_ideal, parse_target


class TestParseCall:
    """parse_call のテスト"""

    def test_nested_call(self):
        node = parse_call("union(squares, finite(1,2))")
        assert node == CallNode("union", [CallNode("squares"), CallNode("finite", [1, 2])])

    def test_numbers_and_lists(self):
        """整数・小数・入れ子のリスト"""
        assert parse_call("[[1,0.5],[-2,3e-1]]") == [[1, 0.5], [-2, 0.3]]

    @pytest.mark.parametrize("text", ["", "ap(0,", "ap(0 2)", "range(0,1))", "a$b"])
    def test_malformed_literal_fails(self, text):
        with pytest.raises(LiteralParseError):
            parse_call(text)

    @pytest.mark.parametrize("text", ["generated[nu2atmost(0),nu2atmost(1)]", "union(squares,finite(1,2))", "euler(1)"])
    def test_literal_round_trip(self, text):
        """構文木からリテラルに戻すと元の文字列になる"""
        assert node_to_literal(parse_call(text)) == text


class TestParseDescriptor:
    """parse_descriptor のテスト"""

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("range(0,10)", RangeSet(lo=0, hi=10)),
            ("ap(1,3)", ArithmeticProgression(offset=1, step=3)),
            ("squares", NamedSparse(family="squares")),
            ("pow2", NamedSparse(family="powers_of_two")),
            ("nu2atmost(2)", Nu2AtMost(t=2)),
            ("compl(finite())", ComplementSet(inner=FiniteSet())),
            ("union(squares,finite(1,2))", UnionSet(parts=(NamedSparse(family="squares"), FiniteSet(values=(1, 2))))),
        ],
    )
    def test_descriptors(self, text, expected):
        assert parse_descriptor(text) == expected

    @pytest.mark.parametrize("text", ["ap(0,0)", "finite(-1)", "range(0)", "union()", "compl(a,b)", "circle(1)"])
    def test_invalid_descriptor_fails(self, text):
        with pytest.raises(LiteralParseError):
            parse_descriptor(text)

    def test_descriptor_literal_round_trip(self):
        """to_literal の出力は再び同じ記述子になる"""
        S = parse_descriptor("compl(union(ap(0,2),pairrow(3)))")
        assert parse_descriptor(S.to_literal()) == S


class TestParseIdeal:
    """parse_ideal のテスト"""

    @pytest.mark.parametrize("kind", ["fin", "density", "summable", "nu2"])
    def test_named_ideals(self, kind):
        assert parse_ideal(kind) == IdealSpec(kind=kind)

    def test_generated_ideal(self):
        ideal = parse_ideal("generated[nu2atmost(0),nu2atmost(1)]")
        assert ideal.kind == "generated"
        assert len(ideal.generators) == 2
        assert ideal.to_literal() == "generated[nu2atmost(0),nu2atmost(1)]"

    @pytest.mark.parametrize("text", ["statistical", "generated", "fin(1)"])
    def test_unknown_ideal_fails(self, text):
        with pytest.raises(LiteralParseError):
            parse_ideal(text)


class TestParseTarget:
    """parse_target のテスト"""

    def test_identity(self):
        assert np.array_equal(parse_target("I", 2, 2), np.eye(2))

    def test_scalar_multiple(self):
        assert np.array_equal(parse_target("0.5", 2, 2), 0.5 * np.eye(2))

    def test_diagonal_list(self):
        assert np.array_equal(parse_target("[1,2]", 2, 2), np.diag([1.0, 2.0]))

    def test_shape_mismatch_fails(self):
        with pytest.raises(LiteralParseError):
            parse_target("[[1,2,3]]", 2, 2)
