"""バッチ実行のコマンドラインフロントエンド

レポートは標準出力へ、ログは標準エラーへ出す。終了コードは
0 = Pass/Regular、1 = Fail/NotRegular、2 = Inconclusive、3 = 入力の解析・解決エラー、
4 = その他の実行エラー。
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from src.config.settings import get_settings
from src.models.errors import InsufficientHorizon, LiteralParseError, UnknownBuiltin
from src.models.schemas import JobSpec
from src.services.job_service import EXIT_ERROR, EXIT_INVALID, JobService, dump_report

logger = logging.getLogger(__name__)

TASKS = ["check", "transform", "witness", "hahn-schur", "pringsheim", "report"]
# 標準出力に CSV で出す表（タスクごと）
PRIMARY_TABLES = {
    "check": "conditions",
    "transform": "transform",
    "witness": "stages",
    "hahn-schur": "stages",
    "pringsheim": "transported",
    "report": "rows",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ideal-summability",
        description="イデアル収束のもとでの行列の正則性を検証します。",
    )
    parser.add_argument("task", choices=TASKS, help="実行するタスク")
    parser.add_argument("--config", help="JobSpec の JSON ファイル（他のフラグで上書き可）")
    parser.add_argument("--matrix", help="組み込み行列のリテラルまたは行列仕様 JSON")
    parser.add_argument("--ideal-i", dest="ideal_i", help="定義域側のイデアル ℐ")
    parser.add_argument("--ideal-j", dest="ideal_j", help="値域側のイデアル 𝒥")
    parser.add_argument("--target", help="目標作用素 T（数値、I、または行列）")
    parser.add_argument("--horizon", type=int, help="ホライズン（16 以上）")
    parser.add_argument("--tol", type=float, help="極限比較の許容誤差")
    parser.add_argument("--stages", type=int, help="スライディングハンプの段数")
    parser.add_argument("--samples", nargs="*", help="E サンプルの記述子リテラル")
    parser.add_argument("--conditions", nargs="*", help="個別に検査する条件 ID")
    parser.add_argument("--mode", help="定理モード（auto、general、unbounded など）")
    parser.add_argument("--audit", action="store_const", const=True, help="含意で省略できる条件も検査する")
    parser.add_argument(
        "--no-behavioral", dest="behavioral", action="store_const", const=False, help="挙動クロスチェックを省略する"
    )
    parser.add_argument("--family", help="transform に使う系列族のリテラル")
    parser.add_argument("--rows", help="transform の結果を出す行の記述子")
    parser.add_argument("--double", help="二重系列のリテラルまたは CSV")
    parser.add_argument("--kernel", help="二重行列カーネルのリテラル")
    parser.add_argument("--out", help="成果物の出力先ディレクトリ")
    parser.add_argument("--seed", type=int, help="乱数シード")
    parser.add_argument("--format", choices=["json", "csv"], help="標準出力の形式")
    parser.add_argument("--log-level", dest="log_level", default=None, help="ログレベル")
    return parser


def job_from_args(args: argparse.Namespace) -> JobSpec:
    """--config の内容にフラグを重ねて JobSpec を作る"""
    fields = {}
    if args.config:
        try:
            fields = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise LiteralParseError(f"設定ファイルを読み込めません: {args.config}: {e}")
    fields["task"] = args.task
    for name in JobSpec.model_fields:
        value = getattr(args, name, None)
        if name != "task" and value is not None:
            fields[name] = value
    return JobSpec(**fields)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=args.log_level or settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    try:
        job = job_from_args(args)
        result = JobService(settings).run(job)
    except (LiteralParseError, UnknownBuiltin, InsufficientHorizon, ValidationError) as e:
        logger.error(f"ジョブを解決できません: {e}")
        return EXIT_INVALID
    except Exception as e:
        logger.error(f"ジョブの実行中にエラーが発生しました: {type(e).__name__}: {e}")
        return EXIT_ERROR

    table = result.tables.get(PRIMARY_TABLES[job.task])
    if job.format == "csv" and table:
        csv.writer(sys.stdout).writerows(table)
    else:
        sys.stdout.write(dump_report(result.report) + "\n")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
