"""CLI 設定・記述子・イデアルで共有するリテラル構文のパーサ

構文例:
    fin, density, summable, nu2, generated[nu2atmost(0), nu2atmost(1)]
    range(0,10), ap(0,2), squares, pow2, pairrow(3), nu2level(1),
    union(squares, finite(1,2)), compl(range(0,5))
    euler(1), random(7,banded), diagonal([[1,0],[0,2]])
"""

import re
from dataclasses import dataclass, field
from typing import Any, List, Union

import numpy as np

from src.models.descriptors import (
    ArithmeticProgression,
    ComplementSet,
    DescriptorBase,
    FiniteSet,
    IdealSpec,
    NamedSparse,
    Nu2AtMost,
    Nu2Level,
    RangeSet,
    UnionSet,
)
from src.models.errors import LiteralParseError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)|(?P<sym>[()\[\],]))"
)


@dataclass
class CallNode:
    """name(args) または name[args] の構文木ノード"""

    name: str
    args: List[Any] = field(default_factory=list)
    bracket: bool = False


Node = Union[CallNode, int, float, list]


def _tokenize(text: str) -> List[str]:
    tokens: List[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise LiteralParseError(f"解釈できない文字があります: {text[pos:]!r}")
        tokens.append(m.group(m.lastgroup))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self, expected=None) -> str:
        tok = self._peek()
        if tok is None:
            raise LiteralParseError(f"リテラルが途中で終わっています: {self.text!r}")
        if expected is not None and tok != expected:
            raise LiteralParseError(f"{expected!r} が必要な位置に {tok!r} があります: {self.text!r}")
        self.pos += 1
        return tok

    def parse(self) -> Node:
        node = self._primary()
        if self._peek() is not None:
            raise LiteralParseError(f"余分なトークンがあります: {self._peek()!r}")
        return node

    def _args(self, closing: str) -> List[Node]:
        args: List[Node] = []
        if self._peek() == closing:
            self._take(closing)
            return args
        while True:
            args.append(self._primary())
            tok = self._take()
            if tok == closing:
                return args
            if tok != ",":
                raise LiteralParseError(f"',' または {closing!r} が必要です: {self.text!r}")

    def _primary(self) -> Node:
        tok = self._take()
        if tok == "[":
            return self._args("]")
        if tok in ("(", ")", "]", ","):
            raise LiteralParseError(f"予期しない記号 {tok!r}: {self.text!r}")
        if re.fullmatch(r"-?\d+", tok):
            return int(tok)
        if tok[0].isdigit() or tok[0] == "-":
            return float(tok)
        nxt = self._peek()
        if nxt == "(":
            self._take("(")
            return CallNode(tok, self._args(")"))
        if nxt == "[":
            self._take("[")
            return CallNode(tok, self._args("]"), bracket=True)
        return CallNode(tok)


def parse_call(text: str) -> Node:
    """リテラルを構文木に変換"""
    if not text or not text.strip():
        raise LiteralParseError("空のリテラルです")
    return _Parser(text).parse()


def _int_arg(node: CallNode, index: int) -> int:
    try:
        value = node.args[index]
    except IndexError:
        raise LiteralParseError(f"{node.name} の引数が足りません")
    if not isinstance(value, int) or value < 0:
        raise LiteralParseError(f"{node.name} の引数は自然数である必要があります: {value!r}")
    return value


def descriptor_from_node(node: Node) -> DescriptorBase:
    if not isinstance(node, CallNode):
        raise LiteralParseError(f"集合記述子ではありません: {node!r}")
    name = node.name
    if name == "finite":
        if any(not isinstance(a, int) or a < 0 for a in node.args):
            raise LiteralParseError("finite の要素は自然数である必要があります")
        return FiniteSet(values=tuple(node.args))
    if name == "range":
        return RangeSet(lo=_int_arg(node, 0), hi=_int_arg(node, 1))
    if name == "ap":
        step = _int_arg(node, 1)
        if step == 0:
            raise LiteralParseError("ap の公差は 1 以上である必要があります")
        return ArithmeticProgression(offset=_int_arg(node, 0), step=step)
    if name == "squares":
        return NamedSparse(family="squares")
    if name == "pow2":
        return NamedSparse(family="powers_of_two")
    if name == "pairrow":
        return NamedSparse(family="pairing_row", r=_int_arg(node, 0))
    if name == "nu2level":
        return Nu2Level(t=_int_arg(node, 0))
    if name == "nu2atmost":
        return Nu2AtMost(t=_int_arg(node, 0))
    if name == "union":
        if not node.args:
            raise LiteralParseError("union には1つ以上の引数が必要です")
        return UnionSet(parts=tuple(descriptor_from_node(a) for a in node.args))
    if name == "compl":
        if len(node.args) != 1:
            raise LiteralParseError("compl の引数は1つです")
        return ComplementSet(inner=descriptor_from_node(node.args[0]))
    raise LiteralParseError(f"未知の集合記述子です: {name}")


def parse_descriptor(text: str) -> DescriptorBase:
    return descriptor_from_node(parse_call(text))


def parse_ideal(text: str) -> IdealSpec:
    node = parse_call(text)
    if not isinstance(node, CallNode):
        raise LiteralParseError(f"イデアルではありません: {text!r}")
    if node.name in ("fin", "density", "summable", "nu2") and not node.args:
        return IdealSpec(kind=node.name)
    if node.name == "generated" and node.args:
        return IdealSpec(
            kind="generated",
            generators=tuple(descriptor_from_node(a) for a in node.args),
        )
    raise LiteralParseError(f"未知のイデアルです: {text!r}")


def parse_target(text: str, m: int, d: int) -> np.ndarray:
    """目標作用素 T のリテラル: 数値（スカラー倍の単位行列）、I、0、または行列"""
    text = text.strip()
    if text in ("I", "id", "identity"):
        return np.eye(m, d)
    node = parse_call(text)
    if isinstance(node, (int, float)):
        return float(node) * np.eye(m, d)
    if isinstance(node, list):
        array = np.asarray(node, dtype=float)
        if array.ndim == 1:
            array = np.diag(array)
        if array.shape != (m, d):
            raise LiteralParseError(f"目標作用素の形が {array.shape} ですが ({m}, {d}) が必要です")
        return array
    raise LiteralParseError(f"目標作用素を解釈できません: {text!r}")


def node_to_literal(node: Node) -> str:
    """構文木をリテラルに戻す"""
    if isinstance(node, CallNode):
        if not node.args and not node.bracket:
            return node.name
        inner = ",".join(node_to_literal(a) for a in node.args)
        return f"{node.name}[{inner}]" if node.bracket else f"{node.name}({inner})"
    if isinstance(node, list):
        return "[" + ",".join(node_to_literal(a) for a in node) + "]"
    return repr(node)
