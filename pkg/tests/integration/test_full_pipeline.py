import json
import os
import pytest

from src.cli import build_parser, main


@pytest.mark.integration
class TestCommandLine:
    """CLI からジョブを実行する統合テスト"""

    def test_check_prints_json_report(self, capsys):
        """レポートは標準出力へ JSON で出る"""
        code = main(["check", "--matrix", "cesaro", "--horizon", "64", "--no-behavioral"])

        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["task"] == "check"
        assert report["regularity"]["overall"] == "Regular"

    def test_csv_format_prints_primary_table(self, capsys):
        code = main(["check", "--matrix", "cesaro", "--horizon", "64", "--no-behavioral", "--format", "csv"])

        assert code == 0
        assert capsys.readouterr().out.splitlines()[0] == "id,status,horizon,quantifier"

    @pytest.mark.parametrize(
        "argv,expected",
        [
            (["check", "--matrix", "cesaro", "--target", "0", "--horizon", "64", "--no-behavioral"], 1),
            (
                [
                    "check",
                    "--matrix",
                    "cesaro",
                    "--ideal-j",
                    "density",
                    "--mode",
                    "countably_generated",
                    "--horizon",
                    "64",
                    "--no-behavioral",
                ],
                2,
            ),
            (["check", "--matrix", "nope", "--horizon", "64"], 3),
            (["check", "--matrix", "ap(0,", "--horizon", "64"], 3),
            (["check", "--matrix", "cesaro", "--horizon", "8"], 3),
            (["hahn-schur", "--matrix", "identity(2)", "--horizon", "64"], 4),
        ],
    )
    def test_exit_codes(self, capsys, argv, expected):
        """終了コード: 0 Pass/Regular, 1 Fail/NotRegular, 2 Inconclusive, 3 入力エラー, 4 実行エラー"""
        assert main(argv) == expected

    def test_config_file_with_flag_override(self, temp_dir, capsys):
        """--config の値はフラグで上書きされる"""
        config = os.path.join(temp_dir, "job.json")
        with open(config, "w", encoding="utf-8") as f:
            json.dump({"matrix": "cesaro", "target": "0", "horizon": 64, "behavioral": False}, f)

        code = main(["check", "--config", config, "--target", "I"])

        assert code == 0
        assert json.loads(capsys.readouterr().out)["job"]["target"] == "I"

    def test_missing_config_file(self, temp_dir):
        assert main(["check", "--config", os.path.join(temp_dir, "missing.json")]) == 3

    def test_artifacts_are_byte_reproducible(self, temp_dir, capsys):
        """同じ入力からは同じバイト列のレポートと CSV"""
        argv = ["witness", "--matrix", "cesaro", "--horizon", "256", "--stages", "4", "--out", temp_dir]
        contents = []
        for _ in range(2):
            assert main(argv) in (0, 2)
            snapshot = {}
            for name in sorted(os.listdir(temp_dir)):
                with open(os.path.join(temp_dir, name), "rb") as f:
                    snapshot[name] = f.read()
            contents.append(snapshot)

        assert contents[0] == contents[1]
        assert {"witness.json", "witness_stages.csv", "witness_x.csv"} <= set(contents[0])

    def test_unknown_task_is_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["plot"])
