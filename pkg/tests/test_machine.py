from pathlib import Path

import pytest
import yaml

from ctm.core import NIL
from ctm.machine import (
    ConfigError,
    Ctm,
    CtmConfig,
    ProcessorSpec,
    check_aggregation,
    config_from_dict,
    config_to_dict,
    load_config,
    mood_reading,
    new_ctm,
    run,
)
from ctm.trace import Trace, stream_of_consciousness

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "example.yaml"


def _random_cfg(n=4, seed=1, lifetime=100, **kw):
    roster = {a: ProcessorSpec("random", {"low": -10, "high": 10}) for a in range(n)}
    return CtmConfig(n_processors=n, seed=seed, lifetime=lifetime, roster=roster, **kw)


def test_new_ctm_height_and_nil_stm():
    ctm = new_ctm(CtmConfig(n_processors=4))
    assert ctm.h == 2
    assert ctm.stm.chunk.gist == NIL


def test_config_errors():
    with pytest.raises(ConfigError) as exc:
        new_ctm(CtmConfig(n_processors=4, roster={7: ProcessorSpec()}))
    assert exc.value.problems[0][0] == "roster.7"
    with pytest.raises(ConfigError):
        new_ctm(CtmConfig(n_processors=8, lifetime=2))
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"n_processors": 4, "bogus": 1})
    assert ("bogus", "unknown field") in exc.value.problems


def test_pipeline_timing_h2():
    ctm = new_ctm(_random_cfg())
    ctm.run(10)
    installs = ctm.trace.of_kind("StmInstall")
    broadcasts = ctm.trace.of_kind("Broadcast")
    assert installs[0]["tick"] == 2 and installs[0]["t"] == 0
    assert broadcasts[0]["tick"] == 3 and broadcasts[0]["t"] == 0
    assert [e["tick"] for e in installs] == list(range(2, 10))
    assert all(b["tick"] == b["t"] + ctm.h + 1 for b in broadcasts)


def test_warm_up_keeps_stm_nil():
    ctm = new_ctm(_random_cfg(n=8))
    for _ in range(ctm.h):
        rep = ctm.tick()
        assert rep.installed is None
        assert ctm.stm.chunk.gist == NIL


def test_steady_state_one_install_per_tick():
    ctm = new_ctm(_random_cfg(n=16))
    ctm.run(100)
    ticks = [e["tick"] for e in ctm.trace.of_kind("StmInstall")]
    assert ticks == list(range(ctm.h, 100))


def test_run_bounds():
    ctm = new_ctm(_random_cfg(lifetime=20))
    assert len(run(ctm, 0)) == 0
    run(ctm, 20)
    assert ctm.trace.events[-1]["tick"] == 19
    with pytest.raises(RuntimeError):
        ctm.tick()


def test_same_seed_same_bytes_and_different_seed_different_winners():
    a, b, c = (new_ctm(_random_cfg(seed=s)) for s in (3, 3, 4))
    for m in (a, b, c):
        m.run(60)
    assert a.trace.to_text() == b.trace.to_text()
    wa = [e["address"] for e in a.trace.of_kind("StmInstall")]
    wc = [e["address"] for e in c.trace.of_kind("StmInstall")]
    assert wa != wc
    for m in (a, c):
        assert check_aggregation(m.trace, m.h) == []


def test_stream_of_consciousness_count():
    ctm = new_ctm(_random_cfg())
    ctm.run(10)
    stream = stream_of_consciousness(ctm.trace)
    # broadcasts land at ticks h+1 .. T-1
    assert [t for t, _ in stream] == list(range(3, 10))
    warm = new_ctm(_random_cfg())
    warm.run(2)
    assert stream_of_consciousness(warm.trace) == []


def _scripted(weights):
    roster = {a: ProcessorSpec("scripted", {"weights": [w]}) for a, w in enumerate(weights)}
    return new_ctm(CtmConfig(n_processors=len(weights), roster=roster, lifetime=20))


def test_mood_reading():
    ctm = _scripted([1, 2, -10, 3])
    ctm.run(5)
    r = mood_reading(ctm, 2)
    assert (r.mood, r.intensity, r.label) == (-4, 16, "pessimistic")
    with pytest.raises(ValueError):
        mood_reading(ctm, 1)
    zero = _scripted([0, 0, 0, 0])
    zero.run(3)
    assert mood_reading(zero, 2).label == "neutral"


def test_query_answer_forms_link_then_uses_it():
    cfg = load_config(EXAMPLE_CONFIG)
    ctm = Ctm(cfg)
    ctm.run(cfg.lifetime)
    formed = ctm.trace.of_kind("LinkFormed")
    assert [(e["a"], e["b"]) for e in formed] == [(0, 1)]
    sends = ctm.trace.of_kind("LinkSend")
    assert sends and all(e["tick"] > formed[0]["tick"] for e in sends)
    assert all(e["deliver_at"] == e["tick"] + 1 for e in sends)
    assert check_aggregation(ctm.trace, ctm.h) == []


def test_input_and_output_maps(tmp_path):
    events = [{"tick": t, "sensor": "eye", "payload": f"flash {t}", "weight": 2} for t in range(5)]
    cfg = config_from_dict({
        "n_processors": 4,
        "lifetime": 10,
        "roster": {1: {"behavior": "constant", "params": {"weight": 2}}},
        "input_map": {"eye": [1, 2]},
        "environment": {"kind": "schedule", "params": {"events": events}},
    })
    ctm = Ctm(cfg)
    ctm.run(10)
    deliveries = ctm.trace.of_kind("InputDelivery")
    assert len(deliveries) == 10
    assert {e["address"] for e in deliveries} == {1, 2}


def test_config_round_trip(tmp_path):
    cfg = load_config(EXAMPLE_CONFIG)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(config_to_dict(cfg)))
    again = load_config(path)
    assert config_to_dict(again) == config_to_dict(cfg)


def test_trace_round_trip(tmp_path):
    ctm = new_ctm(_random_cfg())
    ctm.run(12)
    path = ctm.trace.write(tmp_path / "t.jsonl")
    back = Trace.read(path)
    assert back.to_text() == ctm.trace.to_text()
    assert back.header["height"] == 2


def test_sea_period_batches_feedback():
    script = {t: ["m", 1, 10] for t in range(40)}
    roster = {
        0: ProcessorSpec("valued", {"script": script, "values": {"loud": 1}}),
        1: ProcessorSpec("constant", {"payload": "loud", "weight": 20}),
    }
    ctm = Ctm(CtmConfig(n_processors=2, roster=roster, lifetime=40, sea_period=10))
    ctm.run(40)
    applied = ctm.trace.of_kind("FeedbackApplied")
    assert applied and all((e["tick"] + 1) % 10 == 0 for e in applied)
    assert len(applied) <= 4
