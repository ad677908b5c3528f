import json
import random
import threading

import pytest

from reqforge.pool import (
    Artifact,
    ArtifactKind,
    ArtifactPool,
    ArtifactState,
    CorruptLog,
    DuplicateSubscriber,
    EmptyContent,
    IllegalTransition,
    LogicalClock,
    PoolError,
    ResumeDivergence,
    RunClosed,
    UnknownArtifact,
    load_records,
    rebuild_pool,
)

K = ArtifactKind
S = ArtifactState


def test_publish_assigns_fresh_id_version_one_draft():
    pool = ArtifactPool()
    art = pool.publish(K.INITIAL_REQUIREMENTS, "I need a shopping website.", "human")
    assert art.version == 1
    assert art.state is S.DRAFT
    assert art.role == art.sent_from == "human"
    events = pool.events()
    assert len(events) == 1
    assert events[0].change == "added"
    assert events[0].sequence_no == 1


def test_publish_empty_content_rejected():
    pool = ArtifactPool()
    with pytest.raises(EmptyContent):
        pool.publish(K.SRS, "   ", "archivist")


def test_publish_after_close_rejected():
    pool = ArtifactPool()
    pool.close()
    with pytest.raises(RunClosed):
        pool.publish(K.SRS, "text", "archivist")


def test_update_increments_version_and_keeps_history():
    pool = ArtifactPool()
    art = pool.publish(K.SRS, "v1 text", "archivist")
    updated = pool.update(art.id, "v2 text", S.REVISED)
    assert updated.version == 2
    assert updated.state is S.REVISED
    history = pool.history(art.id)
    assert [a.version for a in history] == [1, 2]
    assert history[0].content == "v1 text"
    assert history[1].content == "v2 text"
    assert history[0].updated_at < history[1].updated_at
    assert history[1].created_at == history[0].created_at


def test_update_unknown_artifact():
    pool = ArtifactPool()
    with pytest.raises(UnknownArtifact):
        pool.update("a9999", "text", S.REVISED)


@pytest.mark.parametrize("start,target,legal", [
    (S.DRAFT, S.REVISED, True),
    (S.DRAFT, S.APPROVED, True),
    (S.DRAFT, S.SUPERSEDED, True),
    (S.REVISED, S.REVISED, True),
    (S.REVISED, S.APPROVED, True),
    (S.REVISED, S.SUPERSEDED, True),
    (S.APPROVED, S.SUPERSEDED, True),
    (S.DRAFT, S.DRAFT, False),
    (S.REVISED, S.DRAFT, False),
    (S.APPROVED, S.DRAFT, False),
    (S.APPROVED, S.REVISED, False),
    (S.APPROVED, S.APPROVED, False),
    (S.SUPERSEDED, S.DRAFT, False),
    (S.SUPERSEDED, S.REVISED, False),
    (S.SUPERSEDED, S.APPROVED, False),
    (S.SUPERSEDED, S.SUPERSEDED, False),
])
def test_state_machine_edges(start, target, legal):
    pool = ArtifactPool()
    art = pool.publish(K.SRS, "text", "archivist")
    # walk to the start state
    if start is S.REVISED:
        pool.update(art.id, "text r", S.REVISED)
    elif start is S.APPROVED:
        pool.update(art.id, "text a", S.APPROVED)
    elif start is S.SUPERSEDED:
        pool.update(art.id, "text s", S.SUPERSEDED)
    if legal:
        assert pool.update(art.id, "next", target).state is target
    else:
        with pytest.raises(IllegalTransition):
            pool.update(art.id, "next", target)


def test_nothing_leaves_approved_except_superseded():
    pool = ArtifactPool()
    art = pool.publish(K.USER_REQUIREMENTS_LIST, "items", "interviewer")
    pool.update(art.id, "items", S.APPROVED)
    for target in (S.DRAFT, S.REVISED, S.APPROVED):
        with pytest.raises(IllegalTransition):
            pool.update(art.id, "items again", target)
    assert pool.update(art.id, "items", S.SUPERSEDED).state is S.SUPERSEDED


def test_role_always_equals_sent_from():
    with pytest.raises(PoolError):
        Artifact(id="a0001", kind=K.SRS, content="x", role="analyst",
                 state=S.DRAFT, sent_from="archivist", send_to=(),
                 version=1, created_at=1, updated_at=1)


def test_subscribe_filters_by_kind_and_orders_delivery():
    pool = ArtifactPool()
    sub = pool.subscribe("analyst", [K.USER_REQUIREMENTS_LIST, K.OPERATING_ENVIRONMENT_LIST])
    pool.publish(K.DIALOGUE_TURN, "hello", "interviewer")
    url = pool.publish(K.USER_REQUIREMENTS_LIST, "items", "interviewer")
    pool.publish(K.OPERATING_ENVIRONMENT_LIST, "env", "interviewer")
    pool.update(url.id, "items", S.APPROVED)
    got = []
    while (event := sub.pop()) is not None:
        got.append((event.kind, event.change, event.sequence_no))
    assert got == [
        (K.USER_REQUIREMENTS_LIST, "added", 2),
        (K.OPERATING_ENVIRONMENT_LIST, "added", 3),
        (K.USER_REQUIREMENTS_LIST, "updated", 4),
    ]


def test_subscribe_empty_filter_receives_nothing():
    pool = ArtifactPool()
    sub = pool.subscribe("idle", [])
    pool.publish(K.SRS, "text", "archivist")
    assert sub.pop() is None


def test_duplicate_subscriber_rejected():
    pool = ArtifactPool()
    pool.subscribe("analyst", [K.SRS])
    with pytest.raises(DuplicateSubscriber):
        pool.subscribe("analyst", [K.SRS])


def test_replay_returns_past_events_after_offset():
    pool = ArtifactPool()
    pool.publish(K.DIALOGUE_TURN, "one", "interviewer")
    pool.publish(K.DIALOGUE_TURN, "two", "enduser")
    sub = pool.subscribe("late", [K.DIALOGUE_TURN])
    assert [e.sequence_no for e in sub.replay()] == [1, 2]
    assert [e.sequence_no for e in sub.replay(from_seq=1)] == [2]
    assert sub.pop() is None  # queue only holds post-subscription events


def test_latest_prefers_later_created_artifact():
    pool = ArtifactPool()
    first = pool.publish(K.SRS, "first doc", "archivist")
    pool.update(first.id, "first doc v2", S.REVISED)
    second = pool.publish(K.SRS, "second doc", "archivist")
    latest = pool.latest(K.SRS)
    assert latest is not None
    assert latest.id == second.id
    assert pool.latest(K.REVIEW_REPORT) is None


def test_events_are_gapless_from_one():
    pool = ArtifactPool()
    for i in range(5):
        pool.publish(K.DIALOGUE_TURN, f"turn {i}", "interviewer")
    assert [e.sequence_no for e in pool.events()] == [1, 2, 3, 4, 5]


def _random_ops(pool: ArtifactPool, rng: random.Random, n_ops: int):
    ids = []
    kinds = list(ArtifactKind)
    states = [S.REVISED, S.APPROVED, S.SUPERSEDED]
    for _ in range(n_ops):
        if not ids or rng.random() < 0.5:
            art = pool.publish(rng.choice(kinds), f"content {rng.randrange(1000)}",
                               rng.choice(["interviewer", "analyst", "archivist"]))
            ids.append(art.id)
        else:
            art_id = rng.choice(ids)
            try:
                pool.update(art_id, f"content {rng.randrange(1000)}", rng.choice(states))
            except IllegalTransition:
                pass


def test_event_sourcing_equivalence_property():
    # acceptance-grade property: state rebuilt from the log always matches
    rng = random.Random(20240817)
    for _ in range(1000):
        pool = ArtifactPool()
        _random_ops(pool, rng, rng.randrange(1, 12))
        rebuilt = rebuild_pool(pool.records())
        assert rebuilt.state_fingerprint() == pool.state_fingerprint()


def test_event_sourcing_equivalence_through_file(tmp_path):
    log = tmp_path / "events.jsonl"
    pool = ArtifactPool(log_path=log)
    _random_ops(pool, random.Random(7), 30)
    pool.close()
    records = load_records(log)
    rebuilt = rebuild_pool(records)
    # the pool without a log path but same ops has the identical fingerprint
    assert rebuilt.state_fingerprint() == ArtifactPool.state_fingerprint(pool)


def test_concurrent_publishers_serialize():
    pool = ArtifactPool()
    errors = []

    def worker(name):
        try:
            for i in range(50):
                pool.publish(K.DIALOGUE_TURN, f"{name} {i}", name)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(f"agent{t}",)) for t in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    events = pool.events()
    assert [e.sequence_no for e in events] == list(range(1, 201))
    rebuilt = rebuild_pool(pool.records())
    assert rebuilt.state_fingerprint() == pool.state_fingerprint()


def test_load_records_strict_rejects_torn_tail(tmp_path):
    log = tmp_path / "events.jsonl"
    pool = ArtifactPool(log_path=log)
    pool.publish(K.SRS, "text", "archivist")
    pool.publish(K.SRS, "more", "archivist")
    pool.close()
    with open(log, "a", encoding="utf-8") as fh:
        fh.write('{"sequence_no": 3, "artifact"')
    with pytest.raises(CorruptLog) as err:
        load_records(log, strict=True)
    assert err.value.last_good == 2
    assert len(load_records(log, strict=False)) == 2


def test_load_records_rejects_gap(tmp_path):
    log = tmp_path / "events.jsonl"
    pool = ArtifactPool(log_path=log)
    pool.publish(K.SRS, "text", "archivist")
    pool.publish(K.SRS, "more", "archivist")
    pool.publish(K.SRS, "third", "archivist")
    pool.close()
    lines = log.read_text().strip().split("\n")
    log.write_text("\n".join([lines[0], lines[2]]) + "\n")
    with pytest.raises(CorruptLog) as err:
        load_records(log)
    assert err.value.last_good == 1


def test_resume_absorbs_matching_prefix_then_appends(tmp_path):
    log = tmp_path / "events.jsonl"
    pool = ArtifactPool(log_path=log)
    pool.publish(K.INITIAL_REQUIREMENTS, "seed", "human")
    pool.publish(K.DIALOGUE_TURN, "q1", "interviewer")
    pool.close()
    records = load_records(log)

    resumed = ArtifactPool(log_path=log, resume_records=records)
    resumed.publish(K.INITIAL_REQUIREMENTS, "seed", "human")
    resumed.publish(K.DIALOGUE_TURN, "q1", "interviewer")
    assert not resumed.resuming()
    resumed.publish(K.DIALOGUE_TURN, "a1", "enduser")
    resumed.close()
    assert len(load_records(log)) == 3


def test_resume_divergence_detected(tmp_path):
    log = tmp_path / "events.jsonl"
    pool = ArtifactPool(log_path=log)
    pool.publish(K.INITIAL_REQUIREMENTS, "seed", "human")
    pool.close()
    records = load_records(log)
    resumed = ArtifactPool(log_path=log, resume_records=records)
    with pytest.raises(ResumeDivergence):
        resumed.publish(K.INITIAL_REQUIREMENTS, "different seed", "human")
    resumed.close()


def test_log_lines_are_self_describing_json(tmp_path):
    log = tmp_path / "events.jsonl"
    pool = ArtifactPool(log_path=log)
    pool.publish(K.INITIAL_REQUIREMENTS, "seed", "human")
    pool.close()
    (line,) = log.read_text().strip().split("\n")
    record = json.loads(line)
    assert record["sequence_no"] == 1
    assert record["change"] == "added"
    art = record["artifact"]
    assert art["kind"] == "InitialRequirements"
    assert art["version"] == 1
    assert art["role"] == art["sent_from"] == "human"


def test_logical_clock_is_monotonic_and_run_local():
    clock = LogicalClock()
    ticks = [clock.tick() for _ in range(5)]
    assert ticks == [1, 2, 3, 4, 5]
    pool = ArtifactPool(clock=LogicalClock(start=100))
    art = pool.publish(K.SRS, "text", "archivist")
    assert art.created_at == 101
