import pytest

from ctm.core import NIL, Rng, gist, make_chunk
from ctm.processors import (
    G_MAX,
    Behavior,
    Feedback,
    MemoryRecord,
    MemoryStore,
    Processor,
    RecordKind,
    StepContext,
    Verdict,
    acknowledge_useful,
    form_link,
    generate_feedback,
    high_level_story,
    make_behavior,
    make_submission,
    prune_memory,
    receive_broadcast,
    sea_update,
    send_via_link,
)


class Base(Behavior):
    def __init__(self, w):
        super().__init__()
        self.w = w

    def propose(self, proc, ctx):
        return gist("speech", "hi"), self.w


def _ctx(p, tick=0):
    return StepContext(p, tick, Rng(0))


@pytest.mark.parametrize("g, base, expected", [(1.0, 3.0, 3.0), (2.0, -5.0, -10.0)])
def test_submission_weight_is_g_times_base(g, base, expected):
    p = Processor(0, Base(base), g=g)
    c = make_submission(p, _ctx(p))
    assert c.weight == expected and c.intensity == abs(expected)


def test_idle_submits_nil_zero():
    p = Processor(0)
    c = make_submission(p, _ctx(p))
    assert c.gist == NIL and c.weight == 0


def test_disabled_uptree_access_submits_zero_weight():
    p = Processor(0, Base(5.0), submit_enabled=False)
    assert make_submission(p, _ctx(p)).weight == 0


def test_expert_queues_answer_for_matching_query():
    p = Processor(1, make_behavior("expert", {"answer": "Alice"}), specialty="name")
    receive_broadcast(p, make_chunk(0, 0, gist("query", "name?"), 50), _ctx(p, 3))
    g, _ = p.behavior.propose(p, _ctx(p, 4))
    assert "answer" in g.modality_tags and "Alice" in g.payload


def test_nil_broadcast_only_stored_and_self_receipt_recorded():
    p = Processor(0, Base(1.0))
    ctx = _ctx(p, 5)
    assert receive_broadcast(p, make_chunk(3, 2, NIL, 0), ctx) == []
    receive_broadcast(p, make_chunk(0, 3, gist("speech", "mine"), 1), ctx)
    kinds = [r.kind for r in p.memory.records]
    assert kinds == [RecordKind.BROADCAST_RECEIVED] * 2
    assert p.received[-1][1].address == 0


def test_link_formation_threshold_and_strength():
    a, b = Processor(0), Processor(1)
    assert not acknowledge_useful(a, b, 0, 3)
    assert not acknowledge_useful(a, b, 1, 3)
    assert not a.linked_to(1)
    assert acknowledge_useful(a, b, 2, 3)
    assert a.linked_to(1) and b.linked_to(0)
    assert a.links[1].strength == 0
    acknowledge_useful(a, b, 3, 3)
    assert a.links[1].strength == 1 and b.links[0].strength == 1


def test_send_via_link_rules():
    a, b = Processor(0), Processor(1)
    c = make_chunk(0, 4, gist("speech", "psst"), 0)
    with pytest.raises(ValueError):
        send_via_link(a, 1, c, 4)
    with pytest.raises(ValueError):
        send_via_link(a, 0, c, 4)
    form_link(a, b)
    msg = send_via_link(a, 1, c, 4)
    assert (msg.sender, msg.receiver, msg.sent_tick) == (0, 1, 4)


def test_sea_update_examples():
    p = Processor(0, g=1.0)
    assert sea_update(p, Feedback(Verdict.EMBOLDEN, 0)) == 2
    p.g = 4.0
    assert sea_update(p, Feedback(Verdict.HUSH, 0)) == 2
    p.g = G_MAX
    assert sea_update(p, Feedback(Verdict.EMBOLDEN, 0)) == G_MAX


def _valued(addr, script, values=None):
    return Processor(addr, make_behavior("valued", {"script": script, "values": values or {}}))


def test_generate_feedback_embolden_when_losing_to_less_valuable():
    p = _valued(0, {0: ["mine", 1, 10]}, {"theirs": 4})
    make_submission(p, _ctx(p, 0))
    receive_broadcast(p, make_chunk(1, 0, gist("speech", "theirs"), 3), _ctx(p, 3))
    fbs = generate_feedback(p, (3, 4))
    assert [f.verdict for f in fbs] == [Verdict.EMBOLDEN]
    assert generate_feedback(p, (3, 4)) == []  # reported once


def test_generate_feedback_hush_when_later_chunk_more_valuable():
    p = _valued(0, {0: ["mine", 5, 1]}, {"better ref=0": 7})
    own = make_submission(p, _ctx(p, 0))
    receive_broadcast(p, own, _ctx(p, 3))
    assert generate_feedback(p, (3, 4)) == []  # won, nothing better yet
    receive_broadcast(p, make_chunk(1, 4, gist("speech", "better ref=0"), 2), _ctx(p, 7))
    fbs = generate_feedback(p, (7, 8))
    assert [(f.verdict, f.ref_tick) for f in fbs] == [(Verdict.HUSH, 0)]


def _rec(tick, w=1.0, flag=None):
    g = gist("speech", f"r{tick}", *([flag] if flag else []))
    return MemoryRecord(tick, RecordKind.SUBMITTED, make_chunk(0, tick, g, w))


def test_prune_keeps_flagged_records():
    store = MemoryStore(capacity=100, recency_window=32)
    flagged = {3, 10, 20, 40, 50}
    for t in range(100):
        store.records.append(_rec(t, 1.0, "surprising" if t in flagged else None))
    store.prune()
    kept = {r.tick for r in store.records}
    assert flagged <= kept
    assert kept == flagged | set(range(68, 100))


def test_prune_equal_weights_only_recency_survives():
    store = MemoryStore(capacity=100, recency_window=32)
    store.records = [_rec(t) for t in range(100)]
    assert store.prune() == 32


def test_prune_keeps_top_decile_weights():
    store = MemoryStore(capacity=100, recency_window=10)
    store.records = [_rec(t, 50.0 if t < 10 else 1.0) for t in range(100)]
    store.prune()
    kept = {r.tick for r in store.records}
    assert kept == set(range(10)) | set(range(90, 100))


def test_prune_under_capacity_is_noop():
    store = MemoryStore(capacity=10)
    store.records = [_rec(t) for t in range(5)]
    assert store.prune() == 5 and len(store) == 5


def test_memory_never_exceeds_capacity():
    store = MemoryStore(capacity=16, recency_window=32)
    for t in range(200):
        store.add(_rec(t, 1.0, "terrible"))
        assert len(store) <= 16


def test_high_level_story():
    p = Processor(0, memory=MemoryStore(capacity=100, recency_window=32))
    for t in (5, 2, 9):
        p.memory.add(_rec(t))
    assert [g.payload for g in high_level_story(p, (0, 10))] == ["r2", "r5", "r9"]
    assert high_level_story(p) == p.memory.story()
    p.memory.records = [_rec(t) for t in range(100)]
    prune_memory(p)
    assert high_level_story(p, (0, 1)) == []
