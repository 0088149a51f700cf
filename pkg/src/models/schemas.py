from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

MembershipStatus = Literal["In", "NotIn", "UnknownAtHorizon"]
LimitStatus = Literal["Converged", "NoLimitDetected", "Inconclusive"]
VerdictStatus = Literal["Pass", "Fail", "Inconclusive"]
Overall = Literal["Regular", "NotRegular", "Inconclusive"]
GroupNormMethod = Literal["ScalarSum", "PositiveUnit", "ExtremePointExhaustive", "Sandwich"]
TaskName = Literal["check", "transform", "witness", "hahn-schur", "pringsheim", "report"]


class Membership(BaseModel):
    status: MembershipStatus = Field(..., description="所属判定")
    diagnostic: Dict[str, float] = Field(default={}, description="数値的な根拠")

    class Config:
        frozen = True


class IdealLimitReport(BaseModel):
    estimate: List[float] = Field(..., description="極限（または limsup）の推定値")
    lower: List[float] = Field(..., description="ホライズン列にわたる下側包絡")
    upper: List[float] = Field(..., description="ホライズン列にわたる上側包絡")
    horizon: int = Field(..., ge=0, description="使用したホライズン")
    status: LimitStatus = Field(..., description="収束判定")
    tol: Optional[float] = Field(None, description="収束判定の許容誤差")
    trail: List[List[float]] = Field(default=[], description="ホライズン H/4, H/2, H での推定値")
    diagnostic: Dict[str, Any] = Field(default={}, description="例外集合・クラスタの診断")

    @property
    def value(self) -> float:
        """スカラー系列の推定値"""
        return self.estimate[0]


class GroupNormBound(BaseModel):
    lower: float = Field(..., description="群ノルムの下界")
    upper: float = Field(..., description="群ノルムの上界")
    exact: bool = Field(..., description="下界と上界が一致するか")
    method: GroupNormMethod = Field(..., description="計算方法")
    maximizer: Optional[List[List[float]]] = Field(
        None, description="下界を達成する x_k（列順）"
    )
    columns: Optional[List[int]] = Field(None, description="maximizer の列番号")

    class Config:
        frozen = True


class TransformResult(BaseModel):
    value: List[float] = Field(..., description="Σ_{k≤horizon} A_{n,k} x_k")
    remainder_bound: float = Field(..., description="打ち切り誤差の上界")
    certified: bool = Field(..., description="上界が証明書に基づくか")
    n: int = Field(..., description="行番号")
    horizon: int = Field(..., description="列ホライズン")


class ConditionVerdict(BaseModel):
    id: str = Field(..., description="条件名（S1, T1♭, F6 など）")
    status: VerdictStatus = Field(..., description="判定")
    evidence: Dict[str, Any] = Field(default={}, description="数値的な根拠と反例")
    horizon: int = Field(..., description="使用したホライズン")
    quantifier: Literal["exact", "sampled"] = Field(
        "exact", description="全称条件をサンプル上でのみ検証したか"
    )
    bindings: Dict[str, Any] = Field(default={}, description="k₀, t₀, k₁, f(n) などの束縛")


class BehavioralSummary(BaseModel):
    families: List[str] = Field(..., description="使用した系列族")
    trials: int = Field(..., description="系列数")
    horizon: int = Field(..., description="ホライズン")
    max_deviation: float = Field(..., description="‖𝒥-lim Ax − Tη‖ の最大値")
    consistent: bool = Field(..., description="最大偏差が許容内か")
    tol: float = Field(..., description="許容誤差")
    witnesses: List[Dict[str, Any]] = Field(default=[], description="偏差が大きかった系列")


class RegularityReport(BaseModel):
    theorem: str = Field(..., description="適用した定理")
    conditions: List[ConditionVerdict] = Field(..., description="条件ごとの判定")
    overall: Overall = Field(..., description="総合判定")
    behavioral: Optional[BehavioralSummary] = Field(None, description="挙動クロスチェック")
    implications: List[str] = Field(default=[], description="省略に用いた含意")
    explanation: str = Field("", description="判定の説明")
    horizon: int = Field(..., description="使用したホライズン")


class RowDiagnostics(BaseModel):
    n: int
    abs_total: float = Field(..., description="Σ_k Σ_{i,j} |a_{n,k}(i,j)|")
    group_norm_upper: float = Field(..., description="‖A_{n,ω}‖ の上界")
    row_sum_deviation: float = Field(..., description="‖Σ_k A_{n,k} − T‖")
    tail_upper: float = Field(..., description="‖A_{n,≥k₀}‖ の上界")


class StageRecord(BaseModel):
    stage: int = Field(..., description="段番号 n")
    row: int = Field(..., description="選んだ行 s_n")
    cut: int = Field(..., description="列の切れ目 m_n")
    block: List[int] = Field(..., description="ブロック M_n = (m_{n-1}, m_n]")
    block_value: float = Field(..., description="‖A_{s_n} x‖ の実測値")
    bound: float = Field(..., description="段の保証値")
    generator_index: int = Field(..., description="s_n を含む最小の生成集合の番号")
    avoided_generator: int = Field(..., description="避けた生成集合の番号")
    candidates: Dict[str, int] = Field(default={}, description="|E_n|, |H_n|, |S_n|")


class SlidingHumpState(BaseModel):
    eta0: float = Field(..., description="目標 limsup η₀")
    eta_bracket: List[float] = Field(..., description="η₀ の推定区間")
    stages: List[StageRecord] = Field(default=[], description="段ごとの記録")
    exhausted_at: Optional[int] = Field(None, description="ホライズン内で完了しなかった段")


class Witness(BaseModel):
    x: List[List[float]] = Field(..., description="x_k（k ≤ horizon）")
    support: str = Field(..., description="台の記述子リテラル")
    rows: List[int] = Field(..., description="選んだ行 s_n")
    achieved: float = Field(..., description="𝒥-limsup ‖A_n x‖ の実測値")
    target: float = Field(..., description="目標値")
    horizon: int = Field(..., description="ホライズン")
    row_values: List[float] = Field(default=[], description="選んだ行での ‖A_{s_n} x‖")
    state: Optional[SlidingHumpState] = Field(None, description="構成の記録")
    diagnostic: Dict[str, Any] = Field(default={}, description="追加の診断")


class HahnSchurResult(BaseModel):
    E: str = Field(..., description="E = {k : x_k = 1} の記述子リテラル")
    defect: float = Field(..., description="𝒥-limsup |Σ_{k∈E} a_{n,k}|")
    eta0: float = Field(..., description="𝒥-limsup Σ_k |a_{n,k}|")
    row_sum_limit: float = Field(..., description="𝒥-lim Σ_k a_{n,k} の推定値")
    lower_bound: float = Field(..., description="η₀/2 − |𝒥-lim Σ_k a_{n,k}|/2")
    witness: Optional[Witness] = Field(None, description="±1 の証拠系列")


class DivergenceWitness(BaseModel):
    kappas: List[float] = Field(..., description="κ_k")
    directions: List[List[float]] = Field(..., description="y_k")
    x: List[List[float]] = Field(..., description="x_k = κ_k y_k")
    partial_norms: List[float] = Field(..., description="‖Σ_{k≤n} T_k x_k‖")


class JobSpec(BaseModel):
    task: TaskName = Field(..., description="実行するタスク")
    matrix: Optional[str] = Field(None, description="組み込み行列のリテラルまたは JSON ファイル")
    ideal_i: str = Field("fin", description="定義域側のイデアル ℐ")
    ideal_j: str = Field("fin", description="値域側のイデアル 𝒥")
    target: str = Field("I", description="目標作用素 T")
    horizon: int = Field(1024, ge=16, description="ホライズン")
    tol: float = Field(1e-6, gt=0, description="極限比較の許容誤差")
    stages: int = Field(6, ge=1, description="スライディングハンプの段数")
    samples: List[str] = Field(default=[], description="追加の E サンプル")
    conditions: List[str] = Field(default=[], description="検査する条件 ID")
    mode: str = Field("auto", description="regular_verdict のモード")
    audit: bool = Field(False, description="含意で省略できる条件も検査する")
    behavioral: bool = Field(True, description="挙動クロスチェックを行う")
    family: Optional[str] = Field(None, description="系列族のリテラル")
    rows: Optional[str] = Field(None, description="変換する行の記述子")
    double: Optional[str] = Field(None, description="二重系列のリテラルまたは CSV")
    kernel: Optional[str] = Field(None, description="二重行列カーネルのリテラル")
    out: Optional[str] = Field(None, description="成果物の出力先ディレクトリ")
    seed: int = Field(0, description="乱数シード")
    format: Literal["json", "csv"] = Field("json", description="標準出力の形式")


class JobResult(BaseModel):
    task: TaskName = Field(..., description="実行したタスク")
    exit_code: int = Field(..., description="終了コード")
    overall: str = Field(..., description="総合結果")
    report: Dict[str, Any] = Field(..., description="レポート本体")
    artifacts: List[str] = Field(default=[], description="書き出したファイル")
    tables: Dict[str, List[List[Any]]] = Field(default={}, description="CSV 出力用の表（先頭行は見出し）")


class HealthResponse(BaseModel):
    status: str = Field(..., description="サービスの状態")
    version: str = Field(..., description="APIバージョン")
    builtins: List[str] = Field(..., description="利用可能な組み込み行列")
