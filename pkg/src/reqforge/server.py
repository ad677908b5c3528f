"""HTTP service over runs: status, artifacts, checkpoints, and a live event feed.

The service keeps one logical executor per run: every call that can advance
a run (creating it, deciding a checkpoint, stepping) funnels through that
run's lock, while read endpoints are lock-free against the pool's own
thread-safe views.  Runs found on disk are served read-only straight from
their persisted logs; they are re-materialized by deterministic
re-execution only when something needs to advance them again.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from reqforge.engine import (
    ConfigError,
    RunConfig,
    RunManager,
    Runner,
    UnknownRun,
)
from reqforge.hitl import (
    AlreadyDecided,
    GateBusy,
    HitlError,
    RefineLimitReached,
    UnknownCheckpoint,
    WrongRole,
)
from reqforge.pool import (
    ArtifactKind,
    ArtifactPool,
    CorruptLog,
    RunClosed,
    UnknownArtifact,
    load_records,
    rebuild_pool,
)

logger = logging.getLogger(__name__)

POLL_INTERVAL = 0.02
CHECKPOINT_STATUSES = ("pending", "approved", "refined", "rejected")
_CONFIG_FIELDS = frozenset(field.name for field in dataclasses.fields(RunConfig))


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, (UnknownRun, UnknownCheckpoint, UnknownArtifact)):
        return HTTPException(status_code=404, detail=str(exc))
    if isinstance(exc, WrongRole):
        return HTTPException(status_code=403, detail=str(exc))
    if isinstance(exc, (AlreadyDecided, RunClosed, RefineLimitReached, GateBusy)):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, (HitlError, ConfigError, CorruptLog)):
        return HTTPException(status_code=400, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


def create_app(manager: RunManager, console_dir=None,
               poll_interval: float = POLL_INTERVAL) -> FastAPI:
    """The HTTP application over one run manager."""
    app = FastAPI(title="reqforge", docs_url=None, redoc_url=None,
                  openapi_url=None)

    registry_lock = threading.Lock()
    run_locks: dict[str, threading.Lock] = {}

    def lock_for(run_id: str) -> threading.Lock:
        with registry_lock:
            return run_locks.setdefault(run_id, threading.Lock())

    # -- executors --------------------------------------------------------

    def advance(runner: Runner) -> None:
        with lock_for(runner.run_id):
            try:
                if not runner.finalized:
                    runner.run()
            except Exception as exc:
                logger.exception("run %s failed while advancing", runner.run_id)
                runner.failure = runner.failure or f"advance: {exc}"

    def advance_async(runner: Runner) -> None:
        threading.Thread(target=advance, args=(runner,), daemon=True,
                         name=f"advance-{runner.run_id}").start()

    def live(run_id: str) -> Runner:
        """The materialized runner, resuming it from disk when needed."""
        try:
            fresh = not manager.is_live(run_id)
            runner = manager.get(run_id)
        except UnknownRun as exc:
            raise _http_error(exc) from None
        if fresh and not runner.config.allow_step and not runner.finalized:
            advance_async(runner)
        return runner

    # -- read-only views ----------------------------------------------------

    def view(run_id: str) -> tuple[ArtifactPool, bool]:
        """(pool, log_complete) without materializing an executor."""
        if manager.is_live(run_id):
            runner = manager.runners[run_id]
            return runner.pool, runner.finalized
        try:
            run_dir = manager.run_dir(run_id)
        except UnknownRun as exc:
            raise _http_error(exc) from None
        if run_dir is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        log_path = run_dir / "events.jsonl"
        records = load_records(log_path) if log_path.exists() else []
        return rebuild_pool(records), True

    def transcript_counters(run_dir: Path) -> tuple[int, int]:
        calls = 0
        tokens = 0
        transcript = run_dir / "transcript.jsonl"
        if transcript.exists():
            with open(transcript, encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    if record.get("op") != "complete":
                        continue
                    calls += 1
                    usage = record.get("response", {}).get("usage", {})
                    tokens += (usage.get("prompt_tokens", 0)
                               + usage.get("completion_tokens", 0))
        return calls, tokens

    def status_record(run_id: str) -> dict:
        if manager.is_live(run_id):
            runner = manager.runners[run_id]
            record = runner.status().to_record()
            record["failure"] = runner.failure
            return record
        run_dir = manager.run_dir(run_id)
        if run_dir is not None:
            status_path = run_dir / "status.json"
            if status_path.exists():
                return json.loads(status_path.read_text(encoding="utf-8"))
            # a run that stopped before finalizing: summarize its log
            pool, _ = view(run_id)
            calls, tokens = transcript_counters(run_dir)
            phase = "elicitation"
            if pool.latest(ArtifactKind.REVIEW_REPORT) is not None:
                phase = "validation"
            elif pool.latest(ArtifactKind.SRS) is not None:
                phase = "specification"
            elif pool.latest(ArtifactKind.SYSTEM_REQUIREMENTS_LIST) is not None:
                phase = "analysis"
            return {"run_id": run_id, "phase": phase, "outcome": None,
                    "counters": {"events": pool.event_count(),
                                 "llm_calls": calls, "tokens": tokens},
                    "failure": ""}
        raise HTTPException(status_code=404, detail=f"no run {run_id!r}")

    # -- run lifecycle -----------------------------------------------------

    @app.post("/runs", status_code=201)
    async def create_run(request: Request) -> dict:
        body = await request.json()
        if not isinstance(body, dict):
            raise HTTPException(status_code=400,
                                detail="request body must be a config record")
        idempotency_key = body.pop("idempotency_key", None)
        unknown = set(body) - _CONFIG_FIELDS
        if unknown:
            raise HTTPException(
                status_code=400,
                detail=f"unknown config fields: {sorted(unknown)}")
        try:
            config = RunConfig.from_record(body)
        except (ConfigError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        runner = manager.create(config, idempotency_key=idempotency_key)
        if not config.allow_step:
            advance_async(runner)
        return {"run_id": runner.run_id}

    @app.get("/runs")
    def list_runs() -> list[dict]:
        return [status_record(run_id) for run_id in manager.run_ids()]

    @app.get("/runs/{run_id}")
    def run_status(run_id: str) -> dict:
        if run_id not in manager.run_ids():
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        return status_record(run_id)

    @app.post("/runs/{run_id}/step")
    def step_run(run_id: str) -> dict:
        runner = live(run_id)
        if not runner.config.allow_step:
            raise HTTPException(
                status_code=403,
                detail=f"run {run_id} does not allow external stepping")
        with lock_for(run_id):
            try:
                status = runner.step()
            except RunClosed as exc:
                raise _http_error(exc) from None
        record = status.to_record()
        record["failure"] = runner.failure
        return record

    # -- artifacts -----------------------------------------------------------

    @app.get("/runs/{run_id}/artifacts")
    def list_artifacts(run_id: str, kind: str | None = None) -> list[dict]:
        pool, _ = view(run_id)
        if kind is None:
            artifacts = pool.all_current()
        else:
            try:
                wanted = ArtifactKind(kind)
            except ValueError:
                raise HTTPException(
                    status_code=400,
                    detail=f"unknown artifact kind {kind!r}") from None
            artifacts = pool.by_kind(wanted)
        return [artifact.to_record() for artifact in artifacts]

    @app.get("/runs/{run_id}/artifacts/{artifact_id}/history")
    def artifact_history(run_id: str, artifact_id: str) -> list[dict]:
        pool, _ = view(run_id)
        try:
            versions = pool.history(artifact_id)
        except UnknownArtifact as exc:
            raise _http_error(exc) from None
        return [artifact.to_record() for artifact in versions]

    # -- event stream ---------------------------------------------------------

    @app.get("/runs/{run_id}/events")
    def stream_events(run_id: str,
                      from_seq: int = Query(0, alias="from", ge=0)):
        view(run_id)  # 404 before the stream starts
        # Each connected client replays from its own offset; frames carry the
        # sequence number as the SSE id so reconnecting clients resume there.

        def frames():
            cursor = from_seq
            while True:
                pool, complete = view(run_id)
                for record in pool.records(cursor):
                    cursor = record["sequence_no"]
                    payload = json.dumps(record, sort_keys=True)
                    yield (f"id: {cursor}\nevent: artifact\n"
                           f"data: {payload}\n\n")
                if complete and cursor >= pool.event_count():
                    yield "event: end\ndata: {}\n\n"
                    return
                time.sleep(poll_interval)

        return StreamingResponse(frames(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    # -- checkpoints ---------------------------------------------------------

    @app.get("/runs/{run_id}/checkpoints")
    def list_checkpoints(run_id: str, status: str | None = None) -> list[dict]:
        if status is not None and status not in CHECKPOINT_STATUSES:
            raise HTTPException(
                status_code=400,
                detail=f"unknown checkpoint status {status!r}")
        if manager.is_live(run_id):
            found = manager.runners[run_id].checkpoints.all(status=status)
            return [checkpoint.to_record() for checkpoint in found]
        try:
            run_dir = manager.run_dir(run_id)
        except UnknownRun as exc:
            raise _http_error(exc) from None
        path = run_dir / "checkpoints.json" if run_dir is not None else None
        if path is None or not path.exists():
            return []
        records = json.loads(path.read_text(encoding="utf-8"))
        if status is not None:
            records = [record for record in records
                       if record["status"] == status]
        return records

    @app.post("/runs/{run_id}/checkpoints/{checkpoint_id}/decision")
    async def decide_checkpoint(run_id: str, checkpoint_id: str,
                                request: Request) -> dict:
        body = await request.json()
        if not isinstance(body, dict):
            raise HTTPException(status_code=400,
                                detail="request body must be a decision record")
        decision = body.get("decision", "")
        actor = body.get("actor", "")
        feedback = body.get("feedback", "")
        if not decision or not actor:
            raise HTTPException(status_code=400,
                                detail="decision and actor are required")
        runner = live(run_id)
        drive = not runner.config.allow_step
        with lock_for(run_id):
            try:
                if drive and not runner.finalized:
                    runner.run()  # catch up after a resume; no-op when current
                checkpoint = runner.decide(checkpoint_id, decision,
                                           actor=actor, feedback=feedback)
                if drive and not runner.finalized:
                    runner.run()
            except (HitlError, RunClosed, UnknownRun) as exc:
                raise _http_error(exc) from None
        return checkpoint.to_record()

    # -- service ------------------------------------------------------------

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "runs": len(manager.run_ids())}

    if console_dir is not None and Path(console_dir).is_dir():
        app.mount("/console",
                  StaticFiles(directory=str(console_dir), html=True),
                  name="console")

    return app


def serve(manager: RunManager, host: str = "127.0.0.1", port: int = 8000,
          console_dir=None) -> None:  # pragma: no cover - process entry
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    uvicorn.run(create_app(manager, console_dir=console_dir),
                host=host, port=port, log_level="warning")
