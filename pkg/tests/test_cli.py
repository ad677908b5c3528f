"""Black-box command line behaviour, including the documented exit codes."""
import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest
from click.testing import CliRunner

from reqforge.cli import main
from reqforge.pool import encode_record, load_records
from test_engine import FULL_RUN_TEXT

FIXTURES = Path(__file__).parent / "fixtures"
AUTO_CONFIG = FIXTURES / "configs" / "mock_auto.txt"
GOLD_ROOT = FIXTURES / "gold"


@pytest.fixture()
def runner():
    return CliRunner()


def run_to_approval(runner, tmp_path) -> Path:
    runs_dir = tmp_path / "runs"
    result = runner.invoke(
        main, ["run", str(AUTO_CONFIG), "--out", str(runs_dir)])
    assert result.exit_code == 0, result.output
    return runs_dir / "shopping-website-001"


class TestRun:
    def test_auto_run_exits_zero_and_writes_artifacts(self, runner, tmp_path):
        runs_dir = tmp_path / "runs"
        result = runner.invoke(
            main, ["run", str(AUTO_CONFIG), "--out", str(runs_dir)])
        assert result.exit_code == 0, result.output
        assert "run: shopping-website-001" in result.output
        assert "outcome: approved" in result.output
        run_dir = runs_dir / "shopping-website-001"
        assert (run_dir / "events.jsonl").exists()
        assert (run_dir / "status.json").exists()
        srs = run_dir / "artifacts" / "srs.md"
        assert srs.exists()
        assert "Software Requirements Specification" in srs.read_text("utf-8")
        assert (run_dir / "artifacts" / "requirements_model.puml").exists()

    def test_bad_config_exits_one(self, runner, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("hitl: auto\n\nno system name here\n", encoding="utf-8")
        result = runner.invoke(
            main, ["run", str(bad), "--out", str(tmp_path / "runs")])
        assert result.exit_code == 1
        assert "error:" in result.stderr

    def test_escalated_run_exits_two(self, runner, tmp_path):
        head, marker, _ = FULL_RUN_TEXT.partition("match: «evaluate»")
        assert marker
        truncated = tmp_path / "truncated.txt"
        truncated.write_text(head, encoding="utf-8")
        result = runner.invoke(
            main, ["run", str(AUTO_CONFIG), "--mock-script", str(truncated),
                   "--out", str(tmp_path / "runs")])
        assert result.exit_code == 2, result.output
        assert "outcome: escalated" in result.output
        assert "failure:" in result.stderr

    def test_manual_run_parks_at_the_first_gate(self, runner, tmp_path):
        runs_dir = tmp_path / "runs"
        result = runner.invoke(
            main, ["run", str(AUTO_CONFIG), "--hitl", "manual",
                   "--out", str(runs_dir)])
        assert result.exit_code == 0, result.output
        assert "pending: cp0001 gate=user_requirements_list" in result.output
        assert "reqforge serve --runs-dir" in result.output
        run_dir = runs_dir / "shopping-website-001"
        assert (run_dir / "events.jsonl").exists()
        assert not (run_dir / "status.json").exists()


class TestEval:
    def test_eval_writes_report_text_csv_and_figures(self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        result = runner.invoke(
            main, ["eval", str(run_dir), str(GOLD_ROOT),
                   "--metrics", "chv,mdc,f1,bleu,semantic_similarity"])
        assert result.exit_code == 0, result.output
        assert "Requirements diversity" in result.output
        assert "Ave" in result.output
        report_dir = run_dir / "report"
        assert (report_dir / "report.txt").exists()
        assert (report_dir / "report.csv").exists()
        figures = sorted(p.name for p in (report_dir / "figures").iterdir())
        assert figures == ["diversity.png", "model.png", "srs.png"]
        assert result.output.count("wrote:") == len(figures) + 2

    def test_eval_missing_gold_exits_one(self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        empty_gold = tmp_path / "gold"
        empty_gold.mkdir()
        result = runner.invoke(
            main, ["eval", str(run_dir), str(empty_gold),
                   "--metrics", "bleu"])
        assert result.exit_code == 1
        assert "error:" in result.stderr

    def test_eval_diversity_needs_no_gold(self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        empty_gold = tmp_path / "gold"
        empty_gold.mkdir()
        result = runner.invoke(
            main, ["eval", str(run_dir), str(empty_gold),
                   "--metrics", "chv,mdc",
                   "--out", str(tmp_path / "report")])
        assert result.exit_code == 0, result.output
        assert "CHV" in result.output
        assert (tmp_path / "report" / "report.csv").exists()

    def test_eval_unknown_metric_exits_one(self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        result = runner.invoke(
            main, ["eval", str(run_dir), str(GOLD_ROOT),
                   "--metrics", "wibble"])
        assert result.exit_code == 1
        assert "wibble" in result.stderr


class TestReplay:
    def test_replay_prints_the_timeline(self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        log_path = run_dir / "events.jsonl"
        events = len(load_records(log_path))
        result = runner.invoke(main, ["replay", str(log_path)])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert len(lines) == events + 1
        assert lines[0].split() == ["1", "added", "InitialRequirements",
                                    "v1", "draft", "from=client"]
        assert lines[-1].startswith(f"ok: {events} events,")

    def test_truncated_log_exits_one_naming_the_last_good_event(
            self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        intact = (run_dir / "events.jsonl").read_bytes()
        events = len(load_records(run_dir / "events.jsonl"))
        torn = tmp_path / "torn.jsonl"
        torn.write_bytes(intact[:-20])
        result = runner.invoke(main, ["replay", str(torn)])
        assert result.exit_code == 1
        assert f"last good sequence_no: {events - 1}" in result.stderr

    def test_gapped_log_exits_one_naming_the_last_good_event(
            self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        lines = (run_dir / "events.jsonl").read_text("utf-8").splitlines()
        del lines[2]  # sequence jumps 2 -> 4
        gapped = tmp_path / "gapped.jsonl"
        gapped.write_text("\n".join(lines) + "\n", encoding="utf-8")
        result = runner.invoke(main, ["replay", str(gapped)])
        assert result.exit_code == 1
        assert "corrupt log:" in result.stderr
        assert "last good sequence_no: 2" in result.stderr

    def test_out_of_order_pipeline_exits_one_with_violations(
            self, runner, tmp_path):
        run_dir = run_to_approval(runner, tmp_path)
        records = load_records(run_dir / "events.jsonl")
        moved = next(i for i, record in enumerate(records)
                     if record["artifact"]["kind"] == "InterviewRecord")
        anchor = next(i for i, record in enumerate(records)
                      if record["artifact"]["kind"] == "UserRequirementsList")
        records.insert(anchor, records.pop(moved))
        for position, record in enumerate(records):
            record["sequence_no"] = position + 1
        shuffled = tmp_path / "shuffled.jsonl"
        shuffled.write_text(
            "".join(encode_record(record) + "\n" for record in records),
            encoding="utf-8")
        result = runner.invoke(main, ["replay", str(shuffled)])
        assert result.exit_code == 1
        assert "violation:" in result.stderr


class TestServe:
    def test_serve_answers_health_and_serves_runs(self, runner, tmp_path):
        run_to_approval(runner, tmp_path)
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        process = subprocess.Popen(
            [sys.executable, "-m", "reqforge", "serve",
             "--addr", f"127.0.0.1:{port}",
             "--runs-dir", str(tmp_path / "runs")],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
        base = f"http://127.0.0.1:{port}"
        try:
            deadline = time.monotonic() + 20
            health = None
            while time.monotonic() < deadline:
                try:
                    health = httpx.get(f"{base}/healthz", timeout=1.0)
                    break
                except httpx.TransportError:
                    if process.poll() is not None:
                        raise AssertionError(
                            process.stdout.read().decode(errors="replace"))
                    time.sleep(0.05)
            assert health is not None and health.status_code == 200
            assert health.json() == {"status": "ok", "runs": 1}
            runs = httpx.get(f"{base}/runs", timeout=5.0).json()
            assert runs[0]["run_id"] == "shopping-website-001"
            assert runs[0]["outcome"] == "approved"
        finally:
            process.terminate()
            process.wait(timeout=10)

    def test_busy_port_exits_one(self, runner, tmp_path):
        with socket.socket() as holder:
            holder.bind(("127.0.0.1", 0))
            holder.listen(1)
            port = holder.getsockname()[1]
            result = runner.invoke(
                main, ["serve", "--addr", f"127.0.0.1:{port}",
                       "--runs-dir", str(tmp_path / "runs")])
            assert result.exit_code == 1
            assert "cannot bind" in result.stderr

    def test_malformed_addr_exits_one(self, runner, tmp_path):
        result = runner.invoke(
            main, ["serve", "--addr", "nonsense",
                   "--runs-dir", str(tmp_path / "runs")])
        assert result.exit_code == 1
        assert "host:port" in result.stderr
