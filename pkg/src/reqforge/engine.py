"""Run engine: wires agents, pool, gates, and scheduling into one run.

A run is a deterministic event-driven loop: the pool fans artifact events
out to per-role subscriptions, the engine delivers exactly one event to
exactly one agent per step (lowest sequence number first, fixed role order
on ties), the agent's policy decides act or wait, and action drafts are
published back into the pool — which is also the only persistence: the
event log under the run directory replays into the same run.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from reqforge import agents, knowledge, specdoc
from reqforge.agents import (
    DEFAULT_MAX_REVIEW_CYCLES,
    DEFAULT_MAX_ROUNDS,
    ROLE_ORDER,
    PipelineContext,
    dialogue_draft,
    select_methodology,
    serialize_review_report,
    parse_review_report,
    validate_dialogue_turn,
)
from reqforge.gateway import (
    Gateway,
    GatewayError,
    HttpBackend,
    MockBackend,
    ReplayBackend,
)
from reqforge.hitl import DEFAULT_MAX_REFINE_CYCLES, Checkpoint, CheckpointManager
from reqforge.pool import (
    Artifact,
    ArtifactEvent,
    ArtifactKind,
    ArtifactPool,
    ArtifactState,
    RunClosed,
    encode_record,
    load_records,
)
from reqforge.runtime import Draft

logger = logging.getLogger(__name__)

PHASES = ("elicitation", "analysis", "specification", "validation", "finalized")
OUTCOMES = ("approved", "rejected", "escalated")
HITL_MODES = ("auto", "manual")
DEPLOYER_TIMINGS = ("after_url_gate", "with_enduser")

#: kinds that accumulate as separate artifacts; every other kind is a
#: singleton whose regeneration becomes a new version of the same artifact
MULTI_KINDS = frozenset({ArtifactKind.DIALOGUE_TURN, ArtifactKind.HUMAN_FEEDBACK,
                         ArtifactKind.REVIEW_REPORT})

#: the seven artifact kinds a completed pipeline must have produced
PIPELINE_KINDS = (
    ArtifactKind.INTERVIEW_RECORD,
    ArtifactKind.USER_REQUIREMENTS_LIST,
    ArtifactKind.OPERATING_ENVIRONMENT_LIST,
    ArtifactKind.SYSTEM_REQUIREMENTS_LIST,
    ArtifactKind.REQUIREMENTS_MODEL,
    ArtifactKind.SRS,
    ArtifactKind.REVIEW_REPORT,
)


class EngineError(Exception):
    pass


class ConfigError(EngineError):
    pass


class NotFinalizable(EngineError):
    pass


class UnknownRun(EngineError):
    pass


class CrashSimulated(EngineError):
    """Raised by the test-only crash hook to emulate a hard process death."""


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    system_name: str
    initial_requirements: str
    hitl: str = "auto"
    max_rounds: int = DEFAULT_MAX_ROUNDS
    max_review_cycles: int = DEFAULT_MAX_REVIEW_CYCLES
    max_refine_cycles: int = DEFAULT_MAX_REFINE_CYCLES
    deployer_interview: str = "after_url_gate"
    seed: int = 0
    allow_step: bool = False
    persona_dir: str | None = None
    knowledge_dir: str | None = None
    gateway: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.system_name.strip():
            raise ConfigError("system_name is empty")
        if not self.initial_requirements.strip():
            raise ConfigError("initial_requirements is empty")
        if self.hitl not in HITL_MODES:
            raise ConfigError(f"hitl mode {self.hitl!r}; expected one of {HITL_MODES}")
        if self.deployer_interview not in DEPLOYER_TIMINGS:
            raise ConfigError(f"deployer_interview {self.deployer_interview!r}; "
                              f"expected one of {DEPLOYER_TIMINGS}")
        for name in ("max_rounds", "max_review_cycles", "max_refine_cycles"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        sections = specdoc.parse_file(path)
        if not sections or "system" not in sections[0].fields:
            raise ConfigError(f"{path}: first section must carry 'system:'")
        head = sections[0]
        gateway_keys = ("backend", "script", "transcript", "base-url", "model",
                        "embed-model", "api-key-env")
        gateway = {key: head.fields[key] for key in gateway_keys
                   if key in head.fields}
        for key in ("script", "transcript"):
            if key in gateway and not Path(gateway[key]).is_absolute():
                gateway[key] = str((Path(path).parent / gateway[key]).resolve())

        def resolve_dir(field_name: str) -> str | None:
            value = head.get(field_name, "")
            if not value:
                return None
            if not Path(value).is_absolute():
                value = str((Path(path).parent / value).resolve())
            return value
        try:
            return cls(
                system_name=head.require("system"),
                initial_requirements=head.body.strip(),
                hitl=head.get("hitl", "auto"),
                max_rounds=int(head.get("max-rounds", str(DEFAULT_MAX_ROUNDS))),
                max_review_cycles=int(head.get("max-review-cycles",
                                               str(DEFAULT_MAX_REVIEW_CYCLES))),
                max_refine_cycles=int(head.get("max-refine-cycles",
                                               str(DEFAULT_MAX_REFINE_CYCLES))),
                deployer_interview=head.get("deployer-interview", "after_url_gate"),
                seed=int(head.get("seed", "0")),
                allow_step=head.get("allow-step", "false").lower() == "true",
                persona_dir=resolve_dir("persona-dir"),
                knowledge_dir=resolve_dir("knowledge-dir"),
                gateway=gateway,
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def to_record(self) -> dict:
        return {
            "system_name": self.system_name,
            "initial_requirements": self.initial_requirements,
            "hitl": self.hitl,
            "max_rounds": self.max_rounds,
            "max_review_cycles": self.max_review_cycles,
            "max_refine_cycles": self.max_refine_cycles,
            "deployer_interview": self.deployer_interview,
            "seed": self.seed,
            "allow_step": self.allow_step,
            "persona_dir": self.persona_dir,
            "knowledge_dir": self.knowledge_dir,
            "gateway": dict(self.gateway),
        }

    @classmethod
    def from_record(cls, record: dict) -> "RunConfig":
        return cls(**{**record, "gateway": dict(record.get("gateway", {}))})


def build_gateway(ref: Mapping[str, str], transcript_path=None) -> Gateway:
    """Construct the configured backend behind a Gateway."""
    backend_kind = ref.get("backend", "mock")
    if backend_kind == "mock":
        script = ref.get("script")
        backend = MockBackend.from_script(script) if script else MockBackend()
    elif backend_kind == "replay":
        if "transcript" not in ref:
            raise ConfigError("replay backend needs a 'transcript' path")
        backend = ReplayBackend.from_transcript(ref["transcript"])
    elif backend_kind == "http":
        if "base-url" not in ref or "model" not in ref:
            raise ConfigError("http backend needs 'base-url' and 'model'")
        backend = HttpBackend(
            base_url=ref["base-url"],
            model=ref["model"],
            embed_model=ref.get("embed-model", ""),
            api_key_env=ref.get("api-key-env", "LLM_API_KEY"),
        )
    else:
        raise ConfigError(f"unknown gateway backend {backend_kind!r}")
    return Gateway(backend, transcript_path=transcript_path)


# -- run status --------------------------------------------------------------

@dataclass(frozen=True)
class RunStatus:
    run_id: str
    phase: str
    outcome: str | None
    events: int
    llm_calls: int
    tokens: int

    def to_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "phase": self.phase,
            "outcome": self.outcome,
            "counters": {"events": self.events, "llm_calls": self.llm_calls,
                         "tokens": self.tokens},
        }


# -- the runner ---------------------------------------------------------------

class Runner:
    """One run: six agents, one pool, three gates, a deterministic scheduler."""

    def __init__(self, config: RunConfig, gateway: Gateway | None = None,
                 run_id: str = "run-001", run_dir=None, resume: bool = False,
                 registry: dict[str, str] | None = None,
                 crash_after: int | None = None):
        self.config = config
        self.run_id = run_id
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.registry = registry
        self.crash_after = crash_after
        log_path = None
        resume_records = None
        if self.run_dir is not None:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            log_path = self.run_dir / "events.jsonl"
            if resume and log_path.exists():
                resume_records = load_records(log_path, strict=False)
                # drop any torn final line from the file itself, so appended
                # events continue a clean log
                with open(log_path, "w", encoding="utf-8") as handle:
                    for record in resume_records:
                        handle.write(encode_record(record) + "\n")
        if gateway is None:
            transcript = (self.run_dir / "transcript.jsonl"
                          if self.run_dir is not None else None)
            if resume and transcript is not None and transcript.exists():
                # deterministic re-execution rewrites the same transcript
                transcript.unlink()
            gateway = build_gateway(config.gateway, transcript_path=transcript)
        self.gateway = gateway
        self.pool = ArtifactPool(log_path=log_path, resume_records=resume_records)
        self.context = PipelineContext(
            self.pool,
            config={"hitl": config.hitl,
                    "deployer_interview": config.deployer_interview})
        try:
            personas = (agents.load_personas(config.persona_dir)
                        if config.persona_dir else None)
            base = (knowledge.KnowledgeBase.load(config.knowledge_dir)
                    if config.knowledge_dir else None)
        except (OSError, specdoc.ParseError,
                knowledge.KnowledgeError) as exc:
            raise ConfigError(str(exc)) from exc
        self.team = agents.build_team(gateway, base=base, personas=personas)
        self.subscriptions = {
            role: self.pool.subscribe(role, self.team[role].spec.monitor_filter)
            for role in ROLE_ORDER
        }
        self.checkpoints = CheckpointManager(
            self.pool, mode=config.hitl,
            max_refine_cycles=config.max_refine_cycles,
            on_decision=self._on_decision)
        self.outcome: str | None = None
        self.outcome_pending: str | None = None
        self.failure = ""
        self.finalized = False
        self._observed = 0
        self._syncing = False
        # Human decisions recorded before a crash are re-applied when the
        # deterministic re-execution re-opens the same checkpoint.
        self._decision_replay: dict[str, dict] = {}
        if resume and self.run_dir is not None:
            checkpoint_path = self.run_dir / "checkpoints.json"
            if checkpoint_path.exists():
                for record in json.loads(checkpoint_path.read_text("utf-8")):
                    if record.get("status") != "pending":
                        self._decision_replay[record["id"]] = record
        self._publish(ArtifactKind.INITIAL_REQUIREMENTS,
                      config.initial_requirements, "client", ("interviewer",))

    # -- status ---------------------------------------------------------

    def phase(self) -> str:
        if self.finalized:
            return "finalized"
        if self.pool.latest(ArtifactKind.REVIEW_REPORT) is not None:
            return "validation"
        if self.pool.latest(ArtifactKind.SRS) is not None:
            return "specification"
        if (self.pool.latest(ArtifactKind.SYSTEM_REQUIREMENTS_LIST) is not None
                or self.context.methodology is not None):
            return "analysis"
        return "elicitation"

    def status(self) -> RunStatus:
        return RunStatus(
            run_id=self.run_id,
            phase=self.phase(),
            outcome=self.outcome,
            events=self.pool.event_count(),
            llm_calls=self.gateway.call_count,
            tokens=self.gateway.token_count,
        )

    # -- scheduling -------------------------------------------------------

    def step(self) -> RunStatus:
        """Deliver the next pending event to one agent; test/manual mode."""
        if self.finalized:
            raise RunClosed(f"run {self.run_id} is finalized")
        if self.outcome_pending is not None:
            return self.finalize()
        self._deliver_next()
        return self.status()

    def run(self, max_steps: int = 100_000) -> RunStatus:
        """Advance until finalized or quiescent (awaiting human decisions)."""
        if self.finalized:
            return self.status()
        for _ in range(max_steps):
            if self.outcome_pending is not None:
                return self.finalize()
            if not self._deliver_next():
                return self.status()
        raise EngineError(f"run {self.run_id} exceeded {max_steps} steps")

    def finalize(self) -> RunStatus:
        if self.finalized:
            raise RunClosed(f"run {self.run_id} is finalized")
        if self.outcome_pending is None:
            raise NotFinalizable(
                f"run {self.run_id} has no approved SRS gate, rejection, "
                f"or escalation")
        self.outcome = self.outcome_pending
        self.finalized = True
        self.pool.close()
        if self.run_dir is not None:
            status_path = self.run_dir / "status.json"
            record = self.status().to_record()
            record["failure"] = self.failure
            status_path.write_text(json.dumps(record, sort_keys=True) + "\n",
                                   encoding="utf-8")
        logger.info("run %s finalized: %s", self.run_id, self.outcome)
        return self.status()

    def decide(self, checkpoint_id: str, decision: str, actor: str,
               feedback: str = "") -> Checkpoint:
        if self.finalized:
            raise RunClosed(f"run {self.run_id} is finalized")
        return self.checkpoints.decide(checkpoint_id, decision, actor=actor,
                                       feedback=feedback)

    def _deliver_next(self) -> bool:
        if self.crash_after is not None and \
                self.pool.event_count() >= self.crash_after:
            raise CrashSimulated(
                f"simulated crash with {self.pool.event_count()} events logged")
        chosen_role = None
        chosen_event: ArtifactEvent | None = None
        for role in ROLE_ORDER:
            event = self.subscriptions[role].peek()
            if event is None:
                continue
            if chosen_event is None or event.sequence_no < chosen_event.sequence_no:
                chosen_role, chosen_event = role, event
        if chosen_role is None:
            return False
        event = self.subscriptions[chosen_role].pop()
        self._handle(chosen_role, event)
        return True

    def _handle(self, role: str, event: ArtifactEvent) -> None:
        agent = self.team[role]
        decision = agent.on_event(event, self.pool, self.context)
        logger.debug("run %s: event %d (%s v%d) -> %s: %s", self.run_id,
                     event.sequence_no, event.kind.value, event.version, role,
                     decision.action or decision.verdict)
        if decision.verdict != "act":
            return
        trigger = self.pool.history(event.artifact_id)[event.version - 1]
        self._perform(role, decision.action, trigger)

    def _perform(self, role: str, action: str, trigger: Artifact) -> None:
        agent = self.team[role]
        instructions = self._instructions_for(action, trigger)
        try:
            if action in ("dialogue_with_enduser", "dialogue_with_deployer"):
                counterpart = action.rsplit("_", 1)[1]
                draft = dialogue_draft(agent, action, counterpart,
                                       self.context.sessions,
                                       self.config.max_rounds, trigger,
                                       instructions)
                send_to = (counterpart,)
            elif action == "respond":
                draft = agent.execute(action, trigger, instructions,
                                      validate_dialogue_turn)
                send_to = ("interviewer",)
            elif action == "select_requirement_model":
                draft = select_methodology(agent, trigger, self.registry)
                send_to = ()
            else:
                validator = agents.validator_for(action, self.pool,
                                                 self.context.sessions,
                                                 self.context.reviews)
                draft = agent.execute(action, trigger, instructions, validator)
                send_to = ()
        except GatewayError as exc:
            # persistent gateway failure: preserve the log, escalate the run
            self.failure = f"{role}.{action}: {exc}"
            self.outcome_pending = "escalated"
            logger.error("run %s: gateway failure in %s.%s: %s", self.run_id,
                         role, action, exc)
            return
        self._publish_draft(draft, send_to)

    def _instructions_for(self, action: str, trigger: Artifact) -> str:
        if trigger.kind is ArtifactKind.HUMAN_FEEDBACK:
            return ("A human reviewer asked for changes in the feedback above. "
                    "Produce the complete revised artifact in the same format, "
                    "resolving every point of the feedback.")
        if action == "revise_srs":
            return ("Resolve every finding in the review above and output the "
                    "complete revised document.")
        if action == "confirm_closure" and self.context.reviews.reports:
            prior = self.context.reviews.reports[-1]
            return "Your previous findings were:\n" + serialize_review_report(prior)
        return ""

    # -- pool plumbing ------------------------------------------------------

    def _publish(self, kind: ArtifactKind, content: str, sent_from: str,
                 send_to=()) -> Artifact:
        artifact = self.pool.publish(kind, content, sent_from, send_to)
        self._sync()
        return artifact

    def _publish_draft(self, draft: Draft, send_to) -> Artifact:
        existing = (None if draft.kind in MULTI_KINDS
                    else self.pool.latest(draft.kind))
        if existing is None:
            artifact = self.pool.publish(draft.kind, draft.content,
                                         draft.sent_from, send_to)
        else:
            artifact = self.pool.update(existing.id, draft.content,
                                        ArtifactState.REVISED)
        self._sync()
        return artifact

    def _sync(self) -> None:
        """Observe and react to every event not yet processed, in order."""
        if self._syncing:
            return
        self._syncing = True
        try:
            while True:
                fresh = self.pool.events(self._observed)
                if not fresh:
                    return
                event = fresh[0]
                self._observed = event.sequence_no
                artifact = self.pool.history(event.artifact_id)[event.version - 1]
                if event.change == "added":
                    self.context.observe(artifact)
                self._react(event, artifact)
        finally:
            self._syncing = False

    def _react(self, event: ArtifactEvent, artifact: Artifact) -> None:
        if self.outcome_pending is not None:
            return
        kind, state = artifact.kind, artifact.state
        if kind is ArtifactKind.USER_REQUIREMENTS_LIST and state in (
                ArtifactState.DRAFT, ArtifactState.REVISED):
            self._open_gate("user_requirements_list", artifact)
        elif kind is ArtifactKind.REQUIREMENTS_MODEL and state in (
                ArtifactState.DRAFT, ArtifactState.REVISED):
            self._open_gate("requirements_model", artifact)
        elif kind is ArtifactKind.REVIEW_REPORT and event.change == "added":
            report = parse_review_report(artifact.content)
            if report.verdict == "approve":
                srs = self.pool.latest(ArtifactKind.SRS)
                if srs is not None and srs.state is not ArtifactState.APPROVED:
                    self._open_gate("srs", srs)
            elif (self.context.reviews.revise_count
                    > self.config.max_review_cycles):
                self.failure = (f"review verdict still 'revise' after "
                                f"{self.config.max_review_cycles} review cycles")
                self.outcome_pending = "escalated"
        elif (kind is ArtifactKind.SRS and state is ArtifactState.REVISED
                and self.context.reviews.latest_verdict == "approve"):
            # regeneration after a human refine re-enters the gate
            self._open_gate("srs", artifact)

    def _open_gate(self, gate: str, artifact: Artifact) -> None:
        if self.checkpoints.pending(gate):
            return
        checkpoint = self.checkpoints.open_checkpoint(artifact.id, gate)
        replay = self._decision_replay.pop(checkpoint.id, None)
        if replay is not None and checkpoint.status == "pending":
            decision = {"approved": "approve", "refined": "refine",
                        "rejected": "reject"}[replay["status"]]
            self.checkpoints.decide(checkpoint.id, decision,
                                    actor=replay["decided_by"],
                                    feedback=replay.get("feedback", ""))
        self._persist_checkpoints()

    def _on_decision(self, checkpoint: Checkpoint) -> None:
        if checkpoint.status == "rejected":
            self.outcome_pending = "rejected"
            self.failure = f"{checkpoint.gate} gate rejected: {checkpoint.feedback}"
        elif checkpoint.status == "approved" and checkpoint.gate == "srs":
            self.outcome_pending = "approved"
        self._persist_checkpoints()
        self._sync()

    def _persist_checkpoints(self) -> None:
        if self.run_dir is None:
            return
        records = [checkpoint.to_record()
                   for checkpoint in self.checkpoints.all()]
        path = self.run_dir / "checkpoints.json"
        path.write_text(json.dumps(records, sort_keys=True) + "\n", "utf-8")


# -- log invariants ------------------------------------------------------------

def verify_pipeline_order(records: list[dict]) -> list[str]:
    """Violations of the pipeline partial order in an event log; [] if clean."""

    def first(kind: ArtifactKind, change: str | None = None,
              state: str | None = None) -> int | None:
        for position, record in enumerate(records):
            if record["artifact"]["kind"] != kind.value:
                continue
            if change is not None and record["change"] != change:
                continue
            if state is not None and record["artifact"]["state"] != state:
                continue
            return position
        return None

    violations: list[str] = []
    numbering = [record["sequence_no"] for record in records]
    if numbering != list(range(1, len(records) + 1)):
        violations.append("event sequence numbers must be gapless and "
                          "ascending from 1")

    def precedes(before: int | None, after: int | None, label: str) -> None:
        if after is not None and (before is None or before >= after):
            violations.append(label)

    record_added = first(ArtifactKind.INTERVIEW_RECORD, "added")
    url_added = first(ArtifactKind.USER_REQUIREMENTS_LIST, "added")
    url_approved = first(ArtifactKind.USER_REQUIREMENTS_LIST, state="approved")
    oel_added = first(ArtifactKind.OPERATING_ENVIRONMENT_LIST, "added")
    srl_added = first(ArtifactKind.SYSTEM_REQUIREMENTS_LIST, "added")
    model_added = first(ArtifactKind.REQUIREMENTS_MODEL, "added")
    model_approved = first(ArtifactKind.REQUIREMENTS_MODEL, state="approved")
    srs_added = first(ArtifactKind.SRS, "added")
    review_added = first(ArtifactKind.REVIEW_REPORT, "added")

    precedes(record_added, url_added,
             "InterviewRecord must precede UserRequirementsList")
    precedes(url_approved, srl_added,
             "UserRequirementsList approval must precede SystemRequirementsList")
    precedes(oel_added, srl_added,
             "OperatingEnvironmentList must precede SystemRequirementsList")
    precedes(srl_added, srs_added,
             "SystemRequirementsList must precede SRS")
    precedes(model_added, srs_added,
             "RequirementsModel must precede SRS")
    precedes(model_approved, srs_added,
             "RequirementsModel approval must precede SRS")
    precedes(srs_added, review_added,
             "SRS must precede ReviewReport")
    return violations


# -- run registry ---------------------------------------------------------------

def _slug(name: str) -> str:
    cleaned = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return cleaned or "run"


class RunManager:
    """Creates, lists, and resumes runs; owns the runs directory."""

    def __init__(self, runs_dir=None):
        self.runs_dir = Path(runs_dir) if runs_dir is not None else None
        self.runners: dict[str, Runner] = {}
        self._order: list[str] = []
        self._keys: dict[str, str] = {}
        if self.runs_dir is not None and self.runs_dir.exists():
            for meta_path in sorted(self.runs_dir.glob("*/meta.json")):
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
                run_id = meta["run_id"]
                self._order.append(run_id)
                if meta.get("idempotency_key"):
                    self._keys[meta["idempotency_key"]] = run_id

    def create(self, config: RunConfig, idempotency_key: str | None = None,
               gateway: Gateway | None = None,
               crash_after: int | None = None) -> Runner:
        if idempotency_key and idempotency_key in self._keys:
            return self.get(self._keys[idempotency_key])
        base = _slug(config.system_name)
        serial = sum(1 for existing in self._order
                     if existing.rsplit("-", 1)[0] == base) + 1
        run_id = f"{base}-{serial:03d}"
        run_dir = self.runs_dir / run_id if self.runs_dir is not None else None
        runner = Runner(config, gateway=gateway, run_id=run_id, run_dir=run_dir,
                        crash_after=crash_after)
        self.runners[run_id] = runner
        self._order.append(run_id)
        if idempotency_key:
            self._keys[idempotency_key] = run_id
        if run_dir is not None:
            meta = {"run_id": run_id, "idempotency_key": idempotency_key,
                    "config": config.to_record()}
            (run_dir / "meta.json").write_text(
                json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
        return runner

    def get(self, run_id: str) -> Runner:
        if run_id in self.runners:
            return self.runners[run_id]
        if run_id in self._order:
            return self.resume(run_id)
        raise UnknownRun(f"no run {run_id!r}")

    def list(self) -> list[Runner]:
        return [self.get(run_id) for run_id in self._order]

    def run_ids(self) -> list[str]:
        return list(self._order)

    def is_live(self, run_id: str) -> bool:
        return run_id in self.runners

    def run_dir(self, run_id: str) -> Path | None:
        """This run's directory on disk, or None when nothing is persisted."""
        if run_id not in self._order:
            raise UnknownRun(f"no run {run_id!r}")
        if self.runs_dir is None:
            return None
        return self.runs_dir / run_id

    def resume(self, run_id: str) -> Runner:
        """Rebuild a run from its persisted log by deterministic re-execution."""
        if self.runs_dir is None:
            raise UnknownRun(f"no runs directory to resume {run_id!r} from")
        run_dir = self.runs_dir / run_id
        meta_path = run_dir / "meta.json"
        if not meta_path.exists():
            raise UnknownRun(f"no run {run_id!r}")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        config = RunConfig.from_record(meta["config"])
        runner = Runner(config, run_id=run_id, run_dir=run_dir, resume=True)
        self.runners[run_id] = runner
        return runner
