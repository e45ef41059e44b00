import pytest

from ctm.scenarios import (
    SCENARIOS,
    run_blindsight,
    run_change_blindness,
    run_inattentional_blindness,
    run_meditation,
    run_scenario,
    run_self_model,
    run_sleep_dream_cycle,
)


def _failed(result):
    return [a.name for a in result.assertions if not a.passed]


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_every_scenario_passes_by_default(name):
    result = run_scenario(name)
    assert result.passed, _failed(result)
    assert any(a.name.startswith("control") for a in result.assertions)
    assert any(a.name.startswith("aggregation") for a in result.assertions)


def test_blindsight_metrics_and_ablations():
    r = run_blindsight()
    assert r.metrics["vision_broadcast_count"] == 0
    assert r.metrics["fetch_success"] is True
    assert r.metrics["control_no_link_fetch_success"] is False
    assert r.metrics["control_vision_broadcast_count"] > 0


def test_blindsight_without_link_fails_its_own_assertion():
    r = run_blindsight({"link": False, "controls": False})
    assert r.metrics["fetch_success"] is False


def test_inattentional_blindness_oracle():
    r = run_inattentional_blindness(11.0)
    assert r.metrics["oracle_gorilla_probability"] == pytest.approx(0.01, abs=1e-12)
    assert r.metrics["control_zero_weight_rate"] == 0.0
    assert r.metrics["control_equal_weights_oracle"] == pytest.approx(0.1, abs=1e-12)


def test_inattentional_blindness_flips_when_gorilla_is_loud():
    r = run_inattentional_blindness(0.5, {"controls": False})
    assert not r.passed
    assert "gorilla probability at most 1%" in _failed(r)


def test_change_blindness_counts():
    r = run_change_blindness()
    assert r.metrics["change_detected_broadcasts"] == 0
    assert r.metrics["control_change_detected_broadcasts"] >= 1
    assert r.metrics["identical_frames_detections"] == 0


@pytest.mark.parametrize("seed", range(20))
def test_sleep_dream_over_seeds(seed):
    r = run_sleep_dream_cycle({"seed": seed, "controls": False})
    assert r.passed, _failed(r)
    assert r.metrics["nil_share_asleep"] >= 0.95
    assert r.metrics["actuator_commands_during_sleep"] == 0


def test_sleep_removed_means_no_sleep():
    r = run_sleep_dream_cycle({"with_sleep": False, "controls": False})
    assert r.metrics["asleep_ticks"] == 0 and r.passed


def test_meditation_shares_and_g():
    r = run_meditation(300)
    shares = [r.metrics[f"mmp_stm_share_third{i}"] for i in (1, 2, 3)]
    assert shares[0] < shares[1] < shares[2]
    assert r.metrics["other_mean_g_end"] < r.metrics["other_mean_g_start"]
    assert r.metrics["control_zero_weight_share"] == 0.0


def test_self_model_tags():
    r = run_self_model()
    assert (r.metrics["arm_tag"], r.metrics["ball_tag"]) == ("self", "not_self")
    assert r.metrics["control_idle_arm_tag"] == "unknown"


def test_unknown_override_rejected():
    with pytest.raises(ValueError):
        run_blindsight({"no_such_knob": 1})
    with pytest.raises(KeyError):
        run_scenario("levitation")


def test_reports_are_reproducible():
    a = run_scenario("change_blindness", seed=3)
    b = run_scenario("change_blindness", seed=3)
    assert a.report() == b.report()
    assert a.traces["main"].to_text() == b.traces["main"].to_text()
