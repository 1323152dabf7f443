import json

import pytest

from xeos.cli import main


def run(args, capsys=None):
    code = main(args)
    return code


class TestSynthExtract:
    def test_synth_then_extract(self, tmp_path, capsys):
        raw = tmp_path / "raw"
        assert main(["synth", "--seed", "3", "--blocks", "60",
                     "--out", str(raw), "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["manifest"]["d1"]["block_rows"] == 60

        datasets = tmp_path / "datasets"
        assert main(["extract", "--input", str(raw),
                     "--output", str(datasets), "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        manifest = json.loads((raw / "manifest.json").read_text())
        assert report["rows"]["d2_transfers"] == manifest["d2"]["rows"]
        assert report["rows"]["d6_accounts"] == manifest["d6"]["rows"]

    def test_dataset_selection(self, small_chain, tmp_path):
        out = tmp_path / "only-d2"
        assert main(["extract", "--input", str(small_chain["raw"]),
                     "--output", str(out), "--datasets", "d2"]) == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "anomalies.csv", "d2_transfers.csv"]

    def test_missing_input_dir_is_io_error(self, tmp_path):
        assert main(["extract", "--input", str(tmp_path / "nope"),
                     "--output", str(tmp_path / "out")]) == 4

    def test_corrupt_raw_line_is_parse_error(self, tmp_path):
        (tmp_path / "blocks_1-1.jsonl").write_text("{not json\n")
        (tmp_path / "traces_1-1.jsonl").write_text("")
        (tmp_path / "receipts_1-1.jsonl").write_text("")
        assert main(["extract", "--input", str(tmp_path),
                     "--output", str(tmp_path / "out")]) == 2

    def test_bad_dataset_name(self, small_chain, tmp_path):
        assert main(["extract", "--input", str(small_chain["raw"]),
                     "--output", str(tmp_path), "--datasets", "d9"]) == 3


class TestStats:
    def test_full_range_single_bucket(self, small_chain, tmp_path, capsys):
        assert main(["stats", "--input", str(small_chain["datasets"]),
                     "--output", str(tmp_path), "--bucket-size", "300",
                     "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert report["summary_path"].endswith("summary.json")
        assert summary["d1"]["block_count"] == 300
        series = (tmp_path / "stats_d1_series.csv").read_text().splitlines()
        assert len(series) == 2  # header + one bucket

    def test_missing_datasets_reported(self, tmp_path, capsys):
        tmp_path.joinpath("in").mkdir()
        assert main(["stats", "--input", str(tmp_path / "in"),
                     "--output", str(tmp_path / "out"), "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["missing_datasets"] == [
            "d1", "d2", "d3", "d4", "d5", "d6", "d7"]


class TestValidate:
    def test_fresh_extraction_is_clean(self, small_chain):
        assert main(["validate", "--input", str(small_chain["datasets"])]) == 0

    def test_corrupted_dataset_fails(self, small_chain, tmp_path):
        src = small_chain["datasets"] / "d6_accounts.csv"
        work = tmp_path / "datasets"
        work.mkdir()
        lines = src.read_text().splitlines()
        head, first = lines[0], lines[1].split(",")
        first[-1] = "UPPERCASE"
        (work / "d6_accounts.csv").write_text(
            "\n".join([head, ",".join(first)] + lines[2:]) + "\n")
        assert main(["validate", "--input", str(work)]) == 3

    def test_empty_dir_is_usage_error(self, tmp_path):
        assert main(["validate", "--input", str(tmp_path)]) == 2


class TestConfigPrecedence:
    def test_config_file_supplies_defaults(self, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"seed": 9, "n_blocks": 40}))
        out = tmp_path / "raw"
        assert main(["synth", "--config", str(config), "--out", str(out),
                     "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["manifest"]["config"]["seed"] == 9
        assert report["manifest"]["d1"]["block_rows"] == 40

    def test_flag_beats_config_file(self, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"seed": 9, "n_blocks": 40}))
        assert main(["synth", "--config", str(config), "--seed", "10",
                     "--out", str(tmp_path / "raw"), "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["manifest"]["config"]["seed"] == 10

    def test_env_var_fallback(self, tmp_path, capsys, monkeypatch):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"seed": 11, "n_blocks": 40}))
        monkeypatch.setenv("XEOS_CONFIG", str(config))
        assert main(["synth", "--out", str(tmp_path / "raw"),
                     "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["manifest"]["config"]["seed"] == 11

    def test_explicit_config_beats_env(self, tmp_path, capsys, monkeypatch):
        env_cfg = tmp_path / "env.json"
        env_cfg.write_text(json.dumps({"seed": 11, "n_blocks": 40}))
        cli_cfg = tmp_path / "cli.json"
        cli_cfg.write_text(json.dumps({"seed": 12, "n_blocks": 40}))
        monkeypatch.setenv("XEOS_CONFIG", str(env_cfg))
        assert main(["synth", "--config", str(cli_cfg),
                     "--out", str(tmp_path / "raw"), "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["manifest"]["config"]["seed"] == 12

    def test_missing_config_file_is_io_error(self, tmp_path):
        assert main(["synth", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "raw")]) == 4


class TestBench:
    def test_small_benchmark_report(self, tmp_path, capsys):
        assert main(["bench", "--records", "2000", "--out", str(tmp_path),
                     "--report", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["records"] == 2000
        assert report["buffered_rps"] > 0
        assert report["synchronous_rps"] > 0
        assert report["speedup"] > 0


def test_report_written_to_file(tmp_path):
    report_path = tmp_path / "r.json"
    assert main(["synth", "--seed", "1", "--blocks", "30",
                 "--out", str(tmp_path / "raw"),
                 "--report", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["manifest"]["d1"]["block_rows"] == 30
