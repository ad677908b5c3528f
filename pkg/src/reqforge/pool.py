"""Shared artifact pool: the blackboard all agents coordinate through.

Artifacts are versioned, state-tracked documents. Every publish or update
appends one event to an append-only, gapless event log; the log is the
persistence format and replaying it rebuilds the pool exactly.
"""
from __future__ import annotations

import json
import logging
import threading
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

logger = logging.getLogger(__name__)


class ArtifactKind(str, Enum):
    INITIAL_REQUIREMENTS = "InitialRequirements"
    INTERVIEW_RECORD = "InterviewRecord"
    USER_REQUIREMENTS_LIST = "UserRequirementsList"
    OPERATING_ENVIRONMENT_LIST = "OperatingEnvironmentList"
    SYSTEM_REQUIREMENTS_LIST = "SystemRequirementsList"
    REQUIREMENTS_MODEL = "RequirementsModel"
    SRS = "SRS"
    REVIEW_REPORT = "ReviewReport"
    HUMAN_FEEDBACK = "HumanFeedback"
    DIALOGUE_TURN = "DialogueTurn"


class ArtifactState(str, Enum):
    DRAFT = "draft"
    REVISED = "revised"
    APPROVED = "approved"
    SUPERSEDED = "superseded"


# draft -> revised* -> approved, any -> superseded; nothing else leaves approved.
_LEGAL_TRANSITIONS = {
    (ArtifactState.DRAFT, ArtifactState.REVISED),
    (ArtifactState.DRAFT, ArtifactState.APPROVED),
    (ArtifactState.DRAFT, ArtifactState.SUPERSEDED),
    (ArtifactState.REVISED, ArtifactState.REVISED),
    (ArtifactState.REVISED, ArtifactState.APPROVED),
    (ArtifactState.REVISED, ArtifactState.SUPERSEDED),
    (ArtifactState.APPROVED, ArtifactState.SUPERSEDED),
}


class PoolError(Exception):
    pass


class RunClosed(PoolError):
    pass


class EmptyContent(PoolError):
    pass


class UnknownArtifact(PoolError):
    pass


class IllegalTransition(PoolError):
    pass


class DuplicateSubscriber(PoolError):
    pass


class CorruptLog(PoolError):
    """Event log fails verification; carries the last intact sequence number."""

    def __init__(self, message: str, last_good: int):
        super().__init__(message)
        self.last_good = last_good


class ResumeDivergence(PoolError):
    """Re-executed event does not match the persisted record it must replace."""


@dataclass(frozen=True)
class Artifact:
    id: str
    kind: ArtifactKind
    content: str
    role: str
    state: ArtifactState
    sent_from: str
    send_to: tuple[str, ...]
    version: int
    created_at: int  # run-local monotonic clock, milliseconds; stable across versions
    updated_at: int  # clock tick this version was written (v1: == created_at)

    def __post_init__(self):
        if self.role != self.sent_from:
            raise PoolError(f"artifact {self.id}: role {self.role!r} != sent_from {self.sent_from!r}")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "content": self.content,
            "role": self.role,
            "state": self.state.value,
            "sent_from": self.sent_from,
            "send_to": list(self.send_to),
            "version": self.version,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Artifact":
        return cls(
            id=record["id"],
            kind=ArtifactKind(record["kind"]),
            content=record["content"],
            role=record["role"],
            state=ArtifactState(record["state"]),
            sent_from=record["sent_from"],
            send_to=tuple(record["send_to"]),
            version=record["version"],
            created_at=record["created_at"],
            updated_at=record["updated_at"],
        )


@dataclass(frozen=True)
class ArtifactEvent:
    sequence_no: int
    artifact_id: str
    kind: ArtifactKind
    change: str  # "added" | "updated"
    version: int
    timestamp: int


class LogicalClock:
    """Run-local monotonic millisecond counter; never wall clock."""

    def __init__(self, start: int = 0):
        self._now = start

    def tick(self) -> int:
        self._now += 1
        return self._now

    @property
    def now(self) -> int:
        return self._now


class Subscription:
    """Per-subscriber FIFO view of pool events, filtered by artifact kind."""

    def __init__(self, pool: "ArtifactPool", name: str, kinds: frozenset[ArtifactKind]):
        self._pool = pool
        self.name = name
        self.kinds = kinds
        self._queue: deque[ArtifactEvent] = deque()

    def _offer(self, event: ArtifactEvent) -> None:
        if event.kind in self.kinds:
            self._queue.append(event)

    def pop(self) -> ArtifactEvent | None:
        """Next undelivered event in sequence order, or None."""
        with self._pool._lock:
            return self._queue.popleft() if self._queue else None

    def peek(self) -> ArtifactEvent | None:
        with self._pool._lock:
            return self._queue[0] if self._queue else None

    def pending(self) -> int:
        with self._pool._lock:
            return len(self._queue)

    def replay(self, from_seq: int = 0) -> list[ArtifactEvent]:
        """Past events matching this subscription's filter, after from_seq."""
        return [
            event
            for event in self._pool.events(from_seq)
            if event.kind in self.kinds
        ]


def event_record(event: ArtifactEvent, artifact: Artifact) -> dict:
    """The self-describing line format of the event log."""
    return {
        "sequence_no": event.sequence_no,
        "change": event.change,
        "timestamp": event.timestamp,
        "artifact": artifact.to_record(),
    }


def encode_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


class ArtifactPool:
    """Append-only versioned artifact store with event delivery.

    All mutation goes through publish/update under one lock (single-writer
    discipline); delivery order equals event order for every subscriber.
    """

    def __init__(self, clock: LogicalClock | None = None, log_path=None,
                 resume_records: list[dict] | None = None):
        self._lock = threading.RLock()
        self._clock = clock or LogicalClock()
        self._artifacts: dict[str, list[Artifact]] = {}
        self._events: list[ArtifactEvent] = []
        self._records: list[dict] = []
        self._subscriptions: dict[str, Subscription] = {}
        self._closed = False
        self._serial = 0
        self._log_path = log_path
        self._log_handle = None
        # records already on disk that re-execution must reproduce before
        # any new event is written (crash-recovery path)
        self._expected = list(resume_records or [])
        self._absorbed = 0
        if log_path is not None:
            self._log_handle = open(log_path, "a", encoding="utf-8")

    # -- queries ---------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self._closed

    @property
    def clock(self) -> LogicalClock:
        return self._clock

    def get(self, artifact_id: str) -> Artifact:
        with self._lock:
            try:
                return self._artifacts[artifact_id][-1]
            except KeyError:
                raise UnknownArtifact(artifact_id) from None

    def history(self, artifact_id: str) -> list[Artifact]:
        """All versions, ascending."""
        with self._lock:
            try:
                return list(self._artifacts[artifact_id])
            except KeyError:
                raise UnknownArtifact(artifact_id) from None

    def latest(self, kind: ArtifactKind) -> Artifact | None:
        """Current version of the most recently created artifact of a kind."""
        with self._lock:
            candidates = [versions[-1] for versions in self._artifacts.values()
                          if versions[-1].kind == kind]
            if not candidates:
                return None
            return max(candidates, key=lambda art: art.created_at)

    def by_kind(self, kind: ArtifactKind) -> list[Artifact]:
        """Current versions of every artifact of a kind, in creation order."""
        with self._lock:
            found = [versions[-1] for versions in self._artifacts.values()
                     if versions[-1].kind == kind]
            return sorted(found, key=lambda art: art.created_at)

    def all_current(self) -> list[Artifact]:
        with self._lock:
            return sorted((versions[-1] for versions in self._artifacts.values()),
                          key=lambda art: art.created_at)

    def events(self, from_seq: int = 0) -> list[ArtifactEvent]:
        with self._lock:
            return [event for event in self._events if event.sequence_no > from_seq]

    def records(self, from_seq: int = 0) -> list[dict]:
        with self._lock:
            return [record for record in self._records if record["sequence_no"] > from_seq]

    def event_count(self) -> int:
        with self._lock:
            return len(self._events)

    def resuming(self) -> bool:
        with self._lock:
            return self._absorbed < len(self._expected)

    # -- mutation --------------------------------------------------------

    def publish(self, kind: ArtifactKind, content: str, sent_from: str,
                send_to: Iterable[str] = ()) -> Artifact:
        with self._lock:
            if self._closed:
                raise RunClosed("pool is closed")
            if not content.strip():
                raise EmptyContent(f"refusing empty {kind.value}")
            self._serial += 1
            tick = self._clock.tick()
            artifact = Artifact(
                id=f"a{self._serial:04d}",
                kind=kind,
                content=content,
                role=sent_from,
                state=ArtifactState.DRAFT,
                sent_from=sent_from,
                send_to=tuple(send_to),
                version=1,
                created_at=tick,
                updated_at=tick,
            )
            self._artifacts[artifact.id] = [artifact]
            self._append_event(artifact, "added")
            return artifact

    def update(self, artifact_id: str, content: str, state: ArtifactState) -> Artifact:
        with self._lock:
            if self._closed:
                raise RunClosed("pool is closed")
            if artifact_id not in self._artifacts:
                raise UnknownArtifact(artifact_id)
            if not content.strip():
                raise EmptyContent(f"refusing empty update of {artifact_id}")
            current = self._artifacts[artifact_id][-1]
            if (current.state, state) not in _LEGAL_TRANSITIONS:
                raise IllegalTransition(
                    f"{artifact_id}: {current.state.value} -> {state.value} is not allowed")
            updated = replace(current, content=content, state=state,
                              version=current.version + 1,
                              updated_at=self._clock.tick())
            self._artifacts[artifact_id].append(updated)
            self._append_event(updated, "updated")
            return updated

    def subscribe(self, name: str, kinds: Iterable[ArtifactKind]) -> Subscription:
        with self._lock:
            if name in self._subscriptions:
                raise DuplicateSubscriber(name)
            subscription = Subscription(self, name, frozenset(kinds))
            self._subscriptions[name] = subscription
            return subscription

    def close(self) -> None:
        with self._lock:
            self._closed = True
            if self._log_handle is not None:
                self._log_handle.close()
                self._log_handle = None

    def _append_event(self, artifact: Artifact, change: str) -> None:
        event = ArtifactEvent(
            sequence_no=len(self._events) + 1,
            artifact_id=artifact.id,
            kind=artifact.kind,
            change=change,
            version=artifact.version,
            timestamp=artifact.updated_at,
        )
        record = event_record(event, artifact)
        self._events.append(event)
        self._records.append(record)
        if self._absorbed < len(self._expected):
            expected = self._expected[self._absorbed]
            if encode_record(record) != encode_record(expected):
                raise ResumeDivergence(
                    f"event {event.sequence_no} diverges from the persisted log: "
                    f"expected {encode_record(expected)[:200]}, got {encode_record(record)[:200]}")
            self._absorbed += 1
        elif self._log_handle is not None:
            self._log_handle.write(encode_record(record) + "\n")
            self._log_handle.flush()
        for subscription in self._subscriptions.values():
            subscription._offer(event)

    # -- persistence -----------------------------------------------------

    def state_fingerprint(self) -> str:
        """Canonical serialization of every artifact history and event."""
        with self._lock:
            state = {
                "artifacts": {
                    artifact_id: [version.to_record() for version in versions]
                    for artifact_id, versions in sorted(self._artifacts.items())
                },
                "events": [record for record in self._records],
            }
            return json.dumps(state, sort_keys=True, ensure_ascii=False)


def load_records(path, strict: bool = True) -> list[dict]:
    """Read an event log; strict mode raises CorruptLog on damage.

    Lenient mode drops a torn final line (the expected shape after a hard
    kill mid-write) but still refuses interior damage.
    """
    records: list[dict] = []
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for index, line in enumerate(lines):
        last_good = records[-1]["sequence_no"] if records else 0
        try:
            record = json.loads(line)
            artifact = Artifact.from_record(record["artifact"])
            sequence_no = record["sequence_no"]
        except (json.JSONDecodeError, KeyError, ValueError, PoolError) as exc:
            if not strict and index == len(lines) - 1:
                logger.warning("dropping torn final log line: %s", exc)
                return records
            raise CorruptLog(
                f"line {index + 1} is unreadable after sequence_no {last_good}: {exc}",
                last_good=last_good) from None
        if sequence_no != last_good + 1:
            raise CorruptLog(
                f"line {index + 1}: sequence_no {sequence_no} after {last_good} (gap)",
                last_good=last_good)
        del artifact
        records.append(record)
    return records


def rebuild_pool(records: list[dict], clock: LogicalClock | None = None) -> ArtifactPool:
    """Replay an event log into a fresh pool; the result is bit-exact."""
    pool = ArtifactPool(clock=clock or LogicalClock())
    for record in records:
        artifact = Artifact.from_record(record["artifact"])
        event = ArtifactEvent(
            sequence_no=record["sequence_no"],
            artifact_id=artifact.id,
            kind=artifact.kind,
            change=record["change"],
            version=artifact.version,
            timestamp=record["timestamp"],
        )
        if record["change"] == "added":
            pool._artifacts[artifact.id] = [artifact]
            pool._serial = max(pool._serial, int(artifact.id.lstrip("a")))
        else:
            if artifact.id not in pool._artifacts:
                raise CorruptLog(f"update for unknown artifact {artifact.id}",
                                 last_good=record["sequence_no"] - 1)
            pool._artifacts[artifact.id].append(artifact)
        pool._events.append(event)
        pool._records.append(record)
        pool._clock._now = max(pool._clock._now, artifact.updated_at)
    return pool
