from typing import List, Optional


class WorkbenchError(ValueError):
    """ワークベンチ共通の例外基底クラス"""


class LiteralParseError(WorkbenchError):
    """リテラル構文の解析に失敗した"""


class UnknownBuiltin(WorkbenchError):
    """未知の組み込み行列・系列族が指定された"""


class InsufficientHorizon(WorkbenchError):
    """評価ホライズンが小さすぎる"""


class EmptyEvaluation(WorkbenchError):
    """評価範囲に集合の要素が一つも入らない"""


class UnsupportedIdeal(WorkbenchError):
    """この操作ではサポートされないイデアル"""


class UnsupportedNormContext(WorkbenchError):
    """サポートされないノルムの組み合わせ"""


class RejectedSample(WorkbenchError):
    """所属宣言のないサンプルが渡された"""


class NotRankOne(WorkbenchError):
    """階数1構造が宣言されていない行列"""


class InvalidFamily(WorkbenchError):
    """系列族の宣言がイデアルと矛盾している"""


class ZeroOperator(WorkbenchError):
    """零ブロックが渡された"""


class NotDivergent(WorkbenchError):
    """行ノルムが発散しない"""


class HorizonExhausted(WorkbenchError):
    """ホライズン内で構成段を完了できなかった"""

    def __init__(self, stage: int, message: Optional[str] = None):
        self.stage = stage
        super().__init__(message or f"段{stage}の構成がホライズン内で完了しませんでした")


class HypothesisFailed(WorkbenchError):
    """構成の前提条件が Pass していない"""

    def __init__(self, failed: List[str], message: Optional[str] = None):
        self.failed = list(failed)
        super().__init__(message or f"前提条件が満たされていません: {', '.join(self.failed)}")
