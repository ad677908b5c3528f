"""Operator entry point: run pipelines, serve the API, evaluate runs, replay logs.

Output lines use stable prefixes (`run:`, `outcome:`, `error:`, ...) so
scripts can grep them; exit codes are part of the contract — 0 success /
approved, 2 finished unapproved (rejected or escalated), 1 error.
"""
from __future__ import annotations

import dataclasses
import json
import os
import socket
import sys
from pathlib import Path

import click

from reqforge.engine import (
    ConfigError,
    EngineError,
    RunConfig,
    RunManager,
    _slug,
    build_gateway,
    verify_pipeline_order,
)
from reqforge.gateway import GatewayError
from reqforge.metrics.judge import JudgeParseError
from reqforge.metrics.report import (
    MetricsError,
    artifacts_from_pool,
    evaluate_run,
    write_report,
)
from reqforge.pool import (
    ArtifactKind,
    CorruptLog,
    PoolError,
    load_records,
    rebuild_pool,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNAPPROVED = 2

ARTIFACT_FILES = {
    ArtifactKind.INITIAL_REQUIREMENTS: "initial_requirements.txt",
    ArtifactKind.INTERVIEW_RECORD: "interview_record.txt",
    ArtifactKind.USER_REQUIREMENTS_LIST: "user_requirements_list.txt",
    ArtifactKind.OPERATING_ENVIRONMENT_LIST: "operating_environment_list.txt",
    ArtifactKind.SYSTEM_REQUIREMENTS_LIST: "system_requirements_list.txt",
    ArtifactKind.REQUIREMENTS_MODEL: "requirements_model.puml",
    ArtifactKind.SRS: "srs.md",
}


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_ERROR)


@click.group()
def main() -> None:
    """Multi-agent requirements pipeline: run, serve, evaluate, replay."""


# -- run ---------------------------------------------------------------------

def _write_artifact_files(runner) -> None:
    if runner.run_dir is None:
        return
    target = runner.run_dir / "artifacts"
    target.mkdir(exist_ok=True)
    for kind, name in ARTIFACT_FILES.items():
        artifact = runner.pool.latest(kind)
        if artifact is None:
            continue
        content = artifact.content
        if not content.endswith("\n"):
            content += "\n"
        (target / name).write_text(content, encoding="utf-8")


@main.command("run")
@click.argument("config_path",
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--hitl", type=click.Choice(["auto", "manual"]), default=None,
              help="Override the config's review mode.")
@click.option("--mock-script", "mock_script", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Answer every completion from this scripted mock backend.")
@click.option("--out", "out_dir", default=Path("runs"), show_default=True,
              type=click.Path(file_okay=False, path_type=Path),
              help="Runs directory; each run gets its own subdirectory.")
def cmd_run(config_path: Path, hitl: str | None, mock_script: Path | None,
            out_dir: Path) -> None:
    """Execute one pipeline run from CONFIG_PATH.

    Auto mode runs to finalization. Manual mode runs until the first
    pending checkpoint, then parks: decisions are made over the HTTP
    service (see `serve`), not the terminal.
    """
    try:
        config = RunConfig.from_file(config_path)
        overrides: dict = {}
        if hitl is not None:
            overrides["hitl"] = hitl
        if mock_script is not None:
            overrides["gateway"] = {**dict(config.gateway), "backend": "mock",
                                    "script": str(mock_script.resolve())}
        if overrides:
            config = dataclasses.replace(config, **overrides)
        manager = RunManager(runs_dir=out_dir)
        runner = manager.create(config)
    except (ConfigError, GatewayError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"run: {runner.run_id}")
    click.echo(f"dir: {manager.run_dir(runner.run_id)}")
    try:
        status = runner.run()
    except (EngineError, PoolError) as exc:
        _fail(str(exc))
    if runner.outcome is None:
        for checkpoint in runner.checkpoints.pending():
            click.echo(f"pending: {checkpoint.id} gate={checkpoint.gate} "
                       f"reviewer={checkpoint.reviewer_role}")
        click.echo(f"hint: decisions are made over HTTP; start the service:")
        click.echo(f"hint:   reqforge serve --runs-dir {out_dir}")
        click.echo(f"hint: then decide in the console or via "
                   f"POST /runs/{runner.run_id}/checkpoints/<id>/decision")
        return
    _write_artifact_files(runner)
    click.echo(f"phase: {status.phase}")
    click.echo(f"outcome: {runner.outcome}")
    if runner.failure:
        click.echo(f"failure: {runner.failure}", err=True)
    sys.exit(EXIT_OK if runner.outcome == "approved" else EXIT_UNAPPROVED)


# -- serve ---------------------------------------------------------------------

@main.command("serve")
@click.option("--addr", default=None,
              help="host:port to bind [env REQFORGE_ADDR; "
                   "default 127.0.0.1:8000].")
@click.option("--runs-dir", "runs_dir", default=Path("runs"),
              show_default=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--console-dir", "console_dir", default=None,
              type=click.Path(file_okay=False, path_type=Path),
              help="Static review-console build to mount at /console.")
def cmd_serve(addr: str | None, runs_dir: Path,
              console_dir: Path | None) -> None:
    """Serve the HTTP API over a runs directory."""
    addr = addr or os.environ.get("REQFORGE_ADDR", "127.0.0.1:8000")
    host, _, port_text = addr.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        port = -1
    if not host or not 0 <= port <= 65535:
        _fail(f"--addr must be host:port, got {addr!r}")
    probe = socket.socket()
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        _fail(f"cannot bind {addr}: {exc}")
    finally:
        probe.close()
    from reqforge.server import serve

    manager = RunManager(runs_dir=runs_dir)
    click.echo(f"serving: http://{host}:{port} runs-dir={runs_dir} "
               f"({len(manager.run_ids())} runs)")
    serve(manager, host=host, port=port, console_dir=console_dir)


# -- eval ---------------------------------------------------------------------

@main.command("eval")
@click.argument("run_dir",
                type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("gold_dir",
                type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--metrics", "metrics_text", default=None,
              help="Comma-separated metric subset, e.g. bleu,chv,f1.")
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False, path_type=Path),
              help="Report directory [default: RUN_DIR/report].")
def cmd_eval(run_dir: Path, gold_dir: Path, metrics_text: str | None,
             out_dir: Path | None) -> None:
    """Score a run's final artifacts against gold references.

    Gold for a system lives at GOLD_DIR/<system-slug>/ as url.txt,
    model.puml, and srs.md; absent files leave their table cells blank.
    """
    log_path = run_dir / "events.jsonl"
    meta_path = run_dir / "meta.json"
    if not log_path.exists():
        _fail(f"{run_dir} has no events.jsonl")
    if not meta_path.exists():
        _fail(f"{run_dir} has no meta.json")
    metrics = None
    if metrics_text:
        metrics = {name.strip() for name in metrics_text.split(",")
                   if name.strip()}
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        config = RunConfig.from_record(meta["config"])
        pool = rebuild_pool(load_records(log_path))
        gateway = build_gateway(config.gateway)
        report = evaluate_run(
            artifacts_from_pool(pool), gold_dir,
            system_id=_slug(config.system_name),
            embed_fn=gateway.embed_fn(),
            judge=gateway,
            metrics=metrics,
            embed_model_name=config.gateway.get("embed-model",
                                                "hash-embedding"),
            judge_model_name=config.gateway.get("model", ""))
    except (MetricsError, JudgeParseError, GatewayError, CorruptLog,
            ConfigError, ValueError) as exc:
        _fail(str(exc))
    click.echo(report.render_text().rstrip("\n"))
    paths = write_report(report, out_dir or run_dir / "report")
    for name in sorted(paths):
        click.echo(f"wrote: {paths[name]}")


# -- replay ---------------------------------------------------------------------

def _intact_prefix(log_path: Path) -> int:
    """Sequence number of the last record in the log's clean leading run."""
    last = 0
    with open(log_path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError:
                break
            if record.get("sequence_no") != last + 1:
                break
            last += 1
    return last


@main.command("replay")
@click.argument("log_path",
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
def cmd_replay(log_path: Path) -> None:
    """Rebuild a pool from an event log and verify its invariants."""
    try:
        records = load_records(log_path)
    except CorruptLog as exc:
        _fail(f"corrupt log: {exc} "
              f"(last good sequence_no: {_intact_prefix(log_path)})")
    violations = verify_pipeline_order(records)
    if violations:
        for violation in violations:
            click.echo(f"violation: {violation}", err=True)
        _fail(f"{len(violations)} ordering violation(s)")
    try:
        pool = rebuild_pool(records)
    except (CorruptLog, PoolError) as exc:
        _fail(str(exc))
    for record in records:
        artifact = record["artifact"]
        click.echo(f"{record['sequence_no']:>4} {record['change']:<7} "
                   f"{artifact['kind']} v{artifact['version']} "
                   f"{artifact['state']} from={artifact['sent_from']}")
    click.echo(f"ok: {len(records)} events, "
               f"{len(pool.all_current())} artifacts")


if __name__ == "__main__":
    main()
