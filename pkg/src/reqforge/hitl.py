"""Human-in-the-loop checkpoints at the three gated artifact hand-offs.

A checkpoint pauses the pipeline while a human (or auto mode) adjudicates
the gated artifact: approve promotes it, refine publishes the feedback as
a pool artifact addressed to the producer (whose regeneration re-enters
the same gate), reject ends the run. Decisions are pool artifacts and
state transitions, so replaying the event log reconstructs them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from reqforge.pool import ArtifactKind, ArtifactPool, ArtifactState

DEFAULT_MAX_REFINE_CYCLES = 5

#: gate name -> (gated artifact kind, deciding human role)
GATES: dict[str, tuple[ArtifactKind, str]] = {
    "user_requirements_list": (ArtifactKind.USER_REQUIREMENTS_LIST, "client"),
    "requirements_model": (ArtifactKind.REQUIREMENTS_MODEL, "requirements_engineer"),
    "srs": (ArtifactKind.SRS, "requirements_engineer"),
}

#: extra roles notified (not deciding) per gate
GATE_NOTIFY: dict[str, tuple[str, ...]] = {"srs": ("client",)}

KIND_TO_GATE = {kind: gate for gate, (kind, _) in GATES.items()}

DECISIONS = ("approve", "refine", "reject")


class HitlError(Exception):
    pass


class UnknownCheckpoint(HitlError):
    pass


class WrongRole(HitlError):
    pass


class AlreadyDecided(HitlError):
    pass


class GateBusy(HitlError):
    pass


class RefineLimitReached(HitlError):
    def __init__(self, gate: str, limit: int):
        super().__init__(f"gate {gate!r} already refined {limit} times; "
                         f"only approve or reject are accepted now")
        self.gate = gate
        self.limit = limit


@dataclass
class Checkpoint:
    id: str
    gate: str
    artifact_id: str
    version: int
    reviewer_role: str
    notify: tuple[str, ...] = ()
    status: str = "pending"  # pending | approved | refined | rejected
    feedback: str = ""
    decided_by: str = ""
    decided_at: int | None = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "gate": self.gate,
            "artifact_id": self.artifact_id,
            "version": self.version,
            "reviewer_role": self.reviewer_role,
            "notify": list(self.notify),
            "status": self.status,
            "feedback": self.feedback,
            "decided_by": self.decided_by,
            "decided_at": self.decided_at,
        }


class CheckpointManager:
    """Opens and adjudicates gates against one run's artifact pool."""

    def __init__(self, pool: ArtifactPool, mode: str = "manual",
                 max_refine_cycles: int = DEFAULT_MAX_REFINE_CYCLES,
                 on_decision: Callable[[Checkpoint], None] | None = None):
        if mode not in ("manual", "auto"):
            raise HitlError(f"unknown hitl mode {mode!r}; expected manual or auto")
        self.pool = pool
        self.mode = mode
        self.max_refine_cycles = max_refine_cycles
        self.on_decision = on_decision
        self._checkpoints: dict[str, Checkpoint] = {}
        self._order: list[str] = []
        self._refines: dict[str, int] = {gate: 0 for gate in GATES}
        self._serial = 0

    # -- queries ------------------------------------------------------------

    def get(self, checkpoint_id: str) -> Checkpoint:
        try:
            return self._checkpoints[checkpoint_id]
        except KeyError:
            raise UnknownCheckpoint(f"no checkpoint {checkpoint_id!r}") from None

    def all(self, status: str | None = None) -> list[Checkpoint]:
        found = [self._checkpoints[checkpoint_id] for checkpoint_id in self._order]
        if status is not None:
            found = [checkpoint for checkpoint in found if checkpoint.status == status]
        return found

    def pending(self, gate: str | None = None) -> list[Checkpoint]:
        found = self.all(status="pending")
        if gate is not None:
            found = [checkpoint for checkpoint in found if checkpoint.gate == gate]
        return found

    def refine_count(self, gate: str) -> int:
        return self._refines[gate]

    # -- gate lifecycle -------------------------------------------------------

    def open_checkpoint(self, artifact_id: str, gate: str) -> Checkpoint:
        artifact = self.pool.get(artifact_id)
        expected_kind, reviewer_role = GATES[gate]
        if artifact.kind is not expected_kind:
            raise HitlError(f"gate {gate!r} takes {expected_kind.value}, "
                            f"not {artifact.kind.value}")
        if self.pending(gate):
            raise GateBusy(f"gate {gate!r} already has a pending checkpoint")
        self._serial += 1
        checkpoint = Checkpoint(
            id=f"cp{self._serial:04d}",
            gate=gate,
            artifact_id=artifact.id,
            version=artifact.version,
            reviewer_role=reviewer_role,
            notify=GATE_NOTIFY.get(gate, ()),
        )
        self._checkpoints[checkpoint.id] = checkpoint
        self._order.append(checkpoint.id)
        if self.mode == "auto":
            self._apply(checkpoint, "approve", actor="auto", feedback="")
        return checkpoint

    def decide(self, checkpoint_id: str, decision: str, actor: str,
               feedback: str = "") -> Checkpoint:
        checkpoint = self.get(checkpoint_id)
        if checkpoint.status != "pending":
            raise AlreadyDecided(f"checkpoint {checkpoint.id} is already "
                                 f"{checkpoint.status}")
        if actor != checkpoint.reviewer_role:
            raise WrongRole(f"gate {checkpoint.gate!r} is decided by "
                            f"{checkpoint.reviewer_role!r}, not {actor!r}")
        if decision not in DECISIONS:
            raise HitlError(f"unknown decision {decision!r}; expected one of {DECISIONS}")
        if decision in ("refine", "reject") and not feedback.strip():
            raise HitlError(f"{decision} requires non-empty feedback")
        if decision == "refine" and self._refines[checkpoint.gate] >= self.max_refine_cycles:
            raise RefineLimitReached(checkpoint.gate, self.max_refine_cycles)
        return self._apply(checkpoint, decision, actor, feedback)

    # -- internals ---------------------------------------------------------------

    def _apply(self, checkpoint: Checkpoint, decision: str, actor: str,
               feedback: str) -> Checkpoint:
        checkpoint.decided_by = actor
        checkpoint.decided_at = self.pool.clock.tick()
        checkpoint.feedback = feedback
        if decision == "approve":
            checkpoint.status = "approved"
            artifact = self.pool.get(checkpoint.artifact_id)
            self.pool.update(artifact.id, artifact.content, ArtifactState.APPROVED)
        elif decision == "refine":
            checkpoint.status = "refined"
            self._refines[checkpoint.gate] += 1
            producer = self.pool.get(checkpoint.artifact_id).sent_from
            self.pool.publish(ArtifactKind.HUMAN_FEEDBACK, feedback,
                              sent_from=actor, send_to=(producer,))
        else:
            checkpoint.status = "rejected"
        if self.on_decision is not None:
            self.on_decision(checkpoint)
        return checkpoint
