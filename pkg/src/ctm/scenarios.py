"""Scripted consciousness phenomena run as falsifiable experiments.

Each ``run_*`` function builds a machine from a plain-data config, runs it,
recomputes the expected quantities from the proportional-selection rule
using the submissions actually made, and returns a :class:`ScenarioResult`.
Every scenario also runs at least one control whose outcome must flip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import NIL, Chunk, CompetitionFunctionSpec, Gist, eval_f, fmt_real, gist
from .environment import Environment, register_environment
from .machine import Ctm, CtmConfig, ProcessorSpec, check_aggregation
from .processors import Behavior, Sensation, register
from .trace import Trace
from .uptree import exact_win_probabilities, mc_tolerance, monte_carlo_win_frequencies

SELF_THRESHOLD = 5
RESPONSE_WINDOW = 2


@dataclass
class Assertion:
    name: str
    passed: bool
    observed: object
    expected: object


@dataclass
class ScenarioResult:
    name: str
    seed: int
    metrics: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)  # run label -> Trace

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed: bool, observed, expected) -> bool:
        self.assertions.append(Assertion(name, bool(passed), observed, expected))
        return bool(passed)

    def report(self) -> str:
        lines = [f"scenario: {self.name}", f"seed: {self.seed}", "", "metrics:"]
        width = max((len(k) for k in self.metrics), default=0)
        for k in sorted(self.metrics):
            lines.append(f"  {k.ljust(width)}  {_fmt(self.metrics[k])}")
        lines += ["", "assertions:"]
        for a in self.assertions:
            mark = "PASS" if a.passed else "FAIL"
            lines.append(f"  [{mark}] {a.name}: observed {_fmt(a.observed)}, expected {_fmt(a.expected)}")
        lines += ["", f"result: {'PASS' if self.passed else 'FAIL'}", "", "--- summary ---"]
        summary = {
            "scenario": self.name,
            "seed": self.seed,
            "passed": self.passed,
            "metrics": {k: _jsonable(v) for k, v in sorted(self.metrics.items())},
            "assertions": [{"name": a.name, "passed": a.passed} for a in self.assertions],
            "runs": sorted(self.traces),
        }
        lines.append(json.dumps(summary, sort_keys=True))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return fmt_real(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float):
        return float(fmt_real(v))
    return v


# -- shared measurement helpers --

def _submissions(trace: Trace) -> dict[int, list[dict]]:
    out: dict[int, list[dict]] = {}
    for e in trace.events:
        if e["kind"] == "Submission":
            out.setdefault(e["tick"], []).append(e)
    return out


def _installs(trace: Trace) -> list[dict]:
    return trace.of_kind("StmInstall")


def _record_chunk(e: dict) -> Chunk:
    return Chunk(e["address"], e["t"], Gist.from_text(e["gist"]), e["weight"], e["intensity"], e["mood"])


def group_share(trace: Trace, f_spec: CompetitionFunctionSpec, in_group: Callable[[dict], bool],
                competitions: set[int] | None = None) -> dict:
    """Observed vs expected fraction of STM installs won by a group.

    Expected uses f/sum(f) over the submissions of each competition, which
    the proportional-selection rule makes exact for additive f.
    """
    subs = _submissions(trace)
    observed = expected = var = 0.0
    n = 0
    for e in _installs(trace):
        s = e["t"]
        if competitions is not None and s not in competitions:
            continue
        fvals = [(eval_f(f_spec, _record_chunk(x)), in_group(x)) for x in subs[s]]
        total = math.fsum(f for f, _ in fvals)
        if total > 0:
            p = math.fsum(f for f, g in fvals if g) / total
        else:  # all-zero competition: uniform pick
            p = sum(1 for _, g in fvals if g) / len(fvals)
        expected += p
        var += p * (1 - p)
        observed += 1.0 if in_group(e) else 0.0
        n += 1
    if n == 0:
        return {"n": 0, "observed": 0.0, "expected": 0.0, "tolerance": 0.0}
    return {
        "n": n,
        "observed": observed / n,
        "expected": expected / n,
        # one extra count of variance keeps 4 sigma meaningful when p is near 0 or 1
        "tolerance": 4.0 * math.sqrt(var + (1.0 if 0 < var else 0.0)) / n + 1e-12,
    }


def _aggregation(result: ScenarioResult, label: str, ctm: Ctm) -> None:
    problems = check_aggregation(ctm.trace, ctm.h)
    result.check(f"aggregation identities hold ({label})", not problems, len(problems), 0)


def _build(n: int, roster: dict, seed: int, lifetime: int, **kw) -> Ctm:
    cfg = CtmConfig(
        n_processors=n,
        lifetime=lifetime,
        seed=seed,
        roster={a: s if isinstance(s, ProcessorSpec) else ProcessorSpec(**s) for a, s in roster.items()},
        **kw,
    )
    return Ctm(cfg)


def _apply_overrides(defaults: dict, overrides: dict | None) -> dict:
    params = dict(defaults)
    for k, v in (overrides or {}).items():
        if k not in params:
            raise ValueError(f"unknown scenario parameter {k!r}; known: {sorted(params)}")
        params[k] = v
    return params


# ---------------------------------------------------------------- behaviors

@register("background")
class Background(Behavior):
    """Ordinary chatter: a fixed low weight, speech modality."""

    def propose(self, proc, ctx):
        return gist("speech", self.params.get("payload", f"thought of p{proc.address}")), float(self.params.get("weight", 1.0))


@register("vision")
class Vision(Behavior):
    """Reports obstacles from the camera; warns linked peers directly."""

    def __init__(self, **params):
        super().__init__(**params)
        self.seen: Sensation | None = None

    def on_input(self, proc, event, ctx):
        if event.sensor != "camera":
            return
        self.seen = event
        d = event.value("distance", math.inf)
        if d <= self.params.get("warn_distance", 3):
            for peer in self.params.get("warn", []):
                if proc.linked_to(peer):
                    ctx.send_link(peer, gist("vision", f"obstacle ahead d={int(d)}", "surprising"), 8.0)

    def propose(self, proc, ctx):
        if self.seen is not None and self.seen.value("distance", math.inf) <= self.params.get("warn_distance", 3):
            return gist("vision", "obstacle ahead", "surprising"), float(self.params.get("alert_weight", 8.0))
        return gist("vision", "clear path"), float(self.params.get("weight", 4.0))


@register("walk")
class Walk(Behavior):
    """Walks forward; sidesteps once when told of an obstacle (by link or broadcast)."""

    def __init__(self, **params):
        super().__init__(**params)
        self.warned = False
        self.sidestepped = False
        self.warned_via: list[str] = []

    def _warn(self, chunk, channel):
        if "vision" in chunk.gist.modality_tags and "obstacle" in chunk.gist.payload:
            self.warned = True
            self.warned_via.append(channel)

    def on_link(self, proc, chunk, ctx):
        self._warn(chunk, "link")

    def on_broadcast(self, proc, chunk, ctx):
        self._warn(chunk, "broadcast")

    def propose(self, proc, ctx):
        if self.warned and not self.sidestepped:
            self.sidestepped = True
            ctx.command("legs", "sidestep")
        else:
            ctx.command("legs", "forward")
        return gist("command", "walking to the ball"), float(self.params.get("weight", 3.0))


@register("player_tracker")
class PlayerTracker(Behavior):
    """Tracks one player; the vision weight policy favours white shirts."""

    def propose(self, proc, ctx):
        shirt = self.params.get("shirt", "white")
        w = self.params["white_weight"] if shirt == "white" else self.params["black_weight"]
        label = "gorilla crossing" if self.params.get("gorilla") else f"{shirt} shirt passes ball"
        return gist("vision", label), float(w)


@register("scene_gist")
class SceneGist(Behavior):
    """Summarises each frame as a scene-level gist (details are dropped)."""

    def __init__(self, **params):
        super().__init__(**params)
        self.scene: str | None = None

    def on_input(self, proc, event, ctx):
        if event.sensor == "frame":
            self.scene = event.gist.payload.split(";")[0]

    def propose(self, proc, ctx):
        if self.scene is None:
            return NIL, 0.0
        return gist("vision", self.scene), float(self.params.get("weight", 20.0))


@register("change_detector")
class ChangeDetector(Behavior):
    """Flags a change when consecutive vision broadcasts carry different gists.

    Keeps submitting the alarm until it has been broadcast.
    """

    def __init__(self, **params):
        super().__init__(**params)
        self.last: str | None = None
        self.alarm: str | None = None
        self.detections = 0

    def on_broadcast(self, proc, chunk, ctx):
        if chunk.address == proc.address:
            self.alarm = None
            self.detections += 1
            return
        if "vision" not in chunk.gist.modality_tags:
            return
        text = chunk.gist.payload
        if self.last is not None and text != self.last:
            self.alarm = f"scene changed: {text}"[:60]
        self.last = text

    def propose(self, proc, ctx):
        if self.alarm is not None:
            return gist("speech", self.alarm, "surprising"), float(self.params.get("weight", 100.0))
        return NIL, 0.0


@register("sleep")
class Sleep(Behavior):
    """Need-for-sleep counter driving awake -> asleep -> dream -> awake.

    Asleep, it floods the competition with heavy NIL chunks.  It gates input
    maps (except inputs heavier than ``gate_weight``) and output maps while
    not awake, and tells the dream processors over links when dreaming
    starts and stops.
    """

    def __init__(self, **params):
        super().__init__(**params)
        self.state = "awake"
        self.counter = 0
        self.entered = 0
        self.log: dict[int, str] = {}
        self.woken_by_noise: int | None = None

    def admit_input(self, proc, event):
        if self.state == "awake":
            return None
        return event.weight > self.params.get("gate_weight", 100.0)

    def admit_output(self, proc, command):
        return None if self.state == "awake" else False

    def on_input(self, proc, event, ctx):
        if self.state != "awake" and event.weight > self.params.get("gate_weight", 100.0):
            self.woken_by_noise = ctx.tick
            self._enter(proc, ctx, "awake")

    def _enter(self, proc, ctx, state):
        old = self.state
        self.state, self.entered, self.counter = state, ctx.tick, 0
        if state == "dream" or old == "dream":
            msg = "dream start" if state == "dream" else "dream stop"
            for peer in self.params.get("notify", []):
                if proc.linked_to(peer):
                    ctx.send_link(peer, gist("command", msg))

    def propose(self, proc, ctx):
        p = self.params
        if self.state == "awake":
            self.counter += 1
            if self.counter > p.get("awake_ticks", 100):
                self._enter(proc, ctx, "asleep")
        elif self.state == "asleep" and ctx.tick - self.entered >= p.get("sleep_ticks", 120):
            self._enter(proc, ctx, "dream")
        elif self.state == "dream" and ctx.tick - self.entered >= p.get("dream_ticks", 100):
            self._enter(proc, ctx, "awake")
        self.log[ctx.tick] = self.state
        if self.state == "asleep":
            return NIL, float(p.get("sleep_weight", 5000.0))
        return NIL, 0.0


@register("dream_creator")
class DreamCreator(Behavior):
    """Recombines remembered gists into dream content while dreaming."""

    def __init__(self, **params):
        super().__init__(**params)
        self.dreaming = False

    def on_link(self, proc, chunk, ctx):
        if chunk.gist.payload == "dream start":
            self.dreaming = True
        elif chunk.gist.payload == "dream stop":
            self.dreaming = False

    def propose(self, proc, ctx):
        if not self.dreaming:
            return gist("speech", "daydream"), float(self.params.get("idle_weight", 0.5))
        pool = [g for g in proc.memory.story() if not g.is_nil and g.payload and "dream" not in g.payload]
        salient = [g for g in pool if g.salience_flags] or pool
        if not salient:
            return gist("vision", "dream: empty room"), float(self.params.get("weight", 60.0))
        a = salient[int(ctx.rng.random() * len(salient))]
        b = salient[int(ctx.rng.random() * len(salient))]
        wa, wb = a.payload.split(), b.payload.split()
        text = " ".join(wa[: max(1, len(wa) // 2)] + wb[len(wb) // 2:])
        return gist("vision", f"dream: {text}"[:80], *a.salience_flags), float(self.params.get("weight", 60.0))


@register("inner")
class Inner(Behavior):
    """Inner-speech processor that answers dream content while dreaming."""

    def __init__(self, **params):
        super().__init__(**params)
        self.dreaming = False
        self.last_dream: str | None = None

    def on_link(self, proc, chunk, ctx):
        if chunk.gist.payload in ("dream start", "dream stop"):
            self.dreaming = chunk.gist.payload == "dream start"

    def on_broadcast(self, proc, chunk, ctx):
        if chunk.gist.payload.startswith("dream:"):
            self.last_dream = chunk.gist.payload[6:30].strip()

    def propose(self, proc, ctx):
        if self.dreaming:
            about = self.last_dream or "the dream"
            return gist("speech", f"inner: and then {about}"), float(self.params.get("weight", 30.0))
        return gist("speech", "inner voice"), float(self.params.get("idle_weight", 0.5))


@register("sensor_reporter")
class SensorReporter(Behavior):
    """Reports its latest sensory input; falls back to low-weight chatter."""

    def __init__(self, **params):
        super().__init__(**params)
        self.latest: Sensation | None = None

    def on_input(self, proc, event, ctx):
        self.latest = event

    def propose(self, proc, ctx):
        ev, self.latest = self.latest, None
        if ev is not None and not ev.gist.is_nil:
            return ev.gist, float(self.params.get("weight", 4.0))
        return gist("speech", f"p{proc.address} musing"), float(self.params.get("idle_weight", 1.0))


@register("speaker")
class Speaker(Behavior):
    """Issues a voice command every ``every`` ticks."""

    def propose(self, proc, ctx):
        if ctx.tick % int(self.params.get("every", 5)) == 0:
            ctx.command("voice", "say hello")
        return gist("speech", "talking"), float(self.params.get("weight", 2.0))


@register("consistency")
class Consistency(Behavior):
    """Checks perceptions against expectations; silent without sensory input."""

    def __init__(self, **params):
        super().__init__(**params)
        self.fed = False

    def on_input(self, proc, event, ctx):
        self.fed = True

    def propose(self, proc, ctx):
        fed, self.fed = self.fed, False
        if fed:
            return gist("speech", "world is consistent"), float(self.params.get("weight", 1.0))
        return NIL, 0.0


@register("meditator")
class Meditator(Behavior):
    """Mindful-meditation processor: every chunk carries a hush for the others."""

    def propose(self, proc, ctx):
        return gist("command", "hush: attend to the breath"), float(self.params.get("weight", 1.0))

    def assess(self, proc, chunk):
        return 1.0 if chunk.address == proc.address else 0.0


@register("wanderer")
class Wanderer(Behavior):
    """Mind-wandering processor."""

    def propose(self, proc, ctx):
        return gist("speech", f"wandering thought {proc.address}"), float(self.params.get("weight", 4.0))


@register("motor")
class Motor(Behavior):
    """Thinks motor intentions on a schedule; acts on them once they are broadcast."""

    def __init__(self, **params):
        super().__init__(**params)
        self.acted: list[tuple[int, str]] = []

    def on_broadcast(self, proc, chunk, ctx):
        if chunk.address == proc.address and chunk.gist.payload.startswith("self: move"):
            target = chunk.gist.payload.split()[-1]
            ctx.command(target, "move")
            self.acted.append((ctx.tick, target))

    def propose(self, proc, ctx):
        for target, every, offset in self.params.get("plans", []):
            if every and ctx.tick % every == offset:
                return gist("command", f"self: move {target}"), float(self.params.get("weight", 40.0))
        return gist("speech", "motor idle"), float(self.params.get("idle_weight", 0.5))


@dataclass
class WorldModelEntry:
    label: str
    tag: str = "unknown"
    evidence_count: int = 0
    misses: int = 0
    spontaneous: int = 0
    conscious: bool = False


@register("world_model")
class WorldModel(Behavior):
    """Tags entities self / not_self from thought -> action co-occurrence.

    A broadcast ``self: move X`` opens an expectation; X moving within the
    response window is consistent evidence, an expired expectation is a
    miss, and a movement nobody asked for is spontaneous.
    """

    def __init__(self, **params):
        super().__init__(**params)
        self.entries: dict[str, WorldModelEntry] = {}
        self.pending: dict[str, list[int]] = {}

    def entry(self, label):
        if label not in self.entries:
            self.entries[label] = WorldModelEntry(label)
        return self.entries[label]

    def on_broadcast(self, proc, chunk, ctx):
        text = chunk.gist.payload
        if text.startswith("self:"):
            self.entry("CTM").conscious = True
            self.entry("CTM").tag = "self"
        if "command" in chunk.gist.modality_tags and text.startswith("self: move"):
            target = text.split()[-1]
            self.entry(target)
            self.pending.setdefault(target, []).append(ctx.tick)

    def on_input(self, proc, event, ctx):
        target = event.gist.payload.split()[0] if event.gist.payload else None
        if not target or not event.gist.payload.endswith("moved"):
            return
        e = self.entry(target)
        opened = self.pending.get(target, [])
        if opened and ctx.tick - opened[0] <= self.params.get("window", RESPONSE_WINDOW):
            opened.pop(0)
            e.evidence_count += 1
        else:
            e.spontaneous += 1

    def propose(self, proc, ctx):
        window = self.params.get("window", RESPONSE_WINDOW)
        for target, opened in self.pending.items():
            while opened and ctx.tick - opened[0] > window:
                opened.pop(0)
                self.entry(target).misses += 1
        self.retag()
        return NIL, 0.0

    def retag(self):
        thr = self.params.get("self_threshold", SELF_THRESHOLD)
        for label, e in self.entries.items():
            if label == "CTM":
                continue
            total = e.evidence_count + e.misses + e.spontaneous
            ratio = e.evidence_count / total if total else 0.0
            if e.evidence_count >= thr and ratio >= 0.8:
                e.tag = "self"
            elif total >= thr and ratio < 0.5:
                e.tag = "not_self"
            else:
                e.tag = "unknown"


# ------------------------------------------------------------- environments

@register_environment("corridor")
class Corridor(Environment):
    """A robot walks a two-lane corridor to fetch a ball past one obstacle."""

    def __init__(self, **params):
        super().__init__(**params)
        self.signals = {"x": 0.0, "lane": 0.0, "collided": 0.0, "fetched": 0.0}
        self._command: str | None = None

    def sense(self, tick):
        s = self.signals
        ox, ol = self.params.get("obstacle_x", 15), self.params.get("obstacle_lane", 0)
        ahead = s["lane"] == ol and s["x"] < ox
        d = ox - s["x"] if ahead else math.inf
        g = gist("vision", f"obstacle d={int(d)}") if ahead else gist("vision", "clear")
        return [Sensation("camera", tick, (("distance", d), ("lane", s["lane"])), g, 3.0)]

    def actuate(self, tick, actuator, command):
        super().actuate(tick, actuator, command)
        if actuator == "legs":
            self._command = command

    def evolve(self, tick):
        s, cmd = self.signals, self._command
        self._command = None
        if s["collided"] or s["fetched"] or cmd is None:
            return
        if cmd == "sidestep":
            s["lane"] = 1.0 - s["lane"]
        s["x"] += 1
        if s["x"] == self.params.get("obstacle_x", 15) and s["lane"] == self.params.get("obstacle_lane", 0):
            s["collided"] = 1.0
        elif s["x"] >= self.params.get("goal_x", 25):
            s["fetched"] = 1.0


@register_environment("scene_stream")
class SceneStream(Environment):
    """Video frames: a scene label plus prop details that may change."""

    def sense(self, tick):
        p = self.params
        scene = p.get("scene", "dinner party in a drawing room")
        if p.get("change_tick") is not None and tick >= p["change_tick"]:
            scene = p.get("new_scene", "garden at dusk")
        period = p.get("prop_period", 0)
        props = p.get("props", ["red scarf", "blue vase", "candles", "portrait"])
        k = (tick // period) % len(props) if period else 0
        detail = ",".join(props[k:] + props[:k])
        return [Sensation("frame", tick, (("frame", float(tick)),), gist("vision", f"{scene}; {detail}"[:100]), 2.0)]


@register_environment("day_world")
class DayWorld(Environment):
    """Sights and sounds every tick, plus optional loud noises."""

    def sense(self, tick):
        out = [
            Sensation("eyes", tick, (), gist("vision", f"daylight scene {tick % 7}", *(("surprising",) if tick % 13 == 0 else ())), 3.0),
            Sensation("ears", tick, (), gist("speech", f"birdsong {tick % 5}"), 3.0),
        ]
        if tick in self.params.get("noise_ticks", []):
            out.append(Sensation("noise", tick, (), gist("speech", "loud bang", "terrible"), float(self.params.get("noise_weight", 500.0))))
        return out


@register_environment("arm_and_ball")
class ArmAndBall(Environment):
    """An arm that moves when commanded and a ball that moves on its own."""

    def __init__(self, **params):
        super().__init__(**params)
        self.signals = {"arm": 0.0, "ball": 0.0}
        self._moved: list[str] = []
        self._arm_cmd = False

    def sense(self, tick):
        out = [Sensation("proprio" if what == "arm" else "eyes", tick, (), gist("vision", f"{what} moved"), 1.0) for what in self._moved]
        return out

    def actuate(self, tick, actuator, command):
        super().actuate(tick, actuator, command)
        if actuator == "arm":
            self._arm_cmd = True

    def evolve(self, tick):
        self._moved = []
        if self._arm_cmd:
            self.signals["arm"] += 1
            self._moved.append("arm")
            self._arm_cmd = False
        if self.rng.random() < self.params.get("ball_rate", 0.1):
            self.signals["ball"] += 1
            self._moved.append("ball")


# ---------------------------------------------------------------- scenarios

BLINDSIGHT_DEFAULTS = {
    "seed": 7,
    "ticks": 40,
    "link": True,
    "vision_submits": False,
    "obstacle_x": 15,
    "goal_x": 25,
    "controls": True,
}


def _blindsight_run(p: dict) -> Ctm:
    roster = {
        0: ProcessorSpec("vision", {"warn": [1]}, specialty="vision", submit_enabled=p["vision_submits"]),
        1: ProcessorSpec("walk", {}, specialty="walk"),
        2: ProcessorSpec("background", {"weight": 2.0}),
        3: ProcessorSpec("background", {"weight": 2.0}),
        4: ProcessorSpec("background", {"weight": 1.0}),
        5: ProcessorSpec("background", {"weight": 1.0}),
    }
    ctm = _build(
        6, roster, p["seed"], p["ticks"],
        input_map={"camera": [0]},
        output_map={1: ["legs"]},
        links=[[0, 1]] if p["link"] else [],
        environment={"kind": "corridor", "params": {"obstacle_x": p["obstacle_x"], "goal_x": p["goal_x"]}},
    )
    ctm.run(p["ticks"])
    return ctm


def _blindsight_metrics(ctm: Ctm) -> dict:
    vision_bc = sum(1 for e in ctm.trace.of_kind("Broadcast") if e["address"] == 0)
    env = ctm.env.signals
    share = group_share(ctm.trace, ctm.config.f_spec, lambda e: e["address"] == 0)
    return {
        "vision_broadcast_count": vision_bc,
        "fetch_success": bool(env["fetched"] and not env["collided"]),
        "collided": bool(env["collided"]),
        "link_messages": len(ctm.trace.of_kind("LinkSend")),
        "vision_expected_share": share["expected"],
        "vision_observed_share": share["observed"],
        "vision_share_tolerance": share["tolerance"],
    }


def run_blindsight(config_overrides: dict | None = None) -> ScenarioResult:
    """Vision cannot enter the competition yet still steers walking over a link."""
    p = _apply_overrides(BLINDSIGHT_DEFAULTS, config_overrides)
    res = ScenarioResult("blindsight", p["seed"])
    ctm = _blindsight_run(p)
    m = _blindsight_metrics(ctm)
    res.metrics.update(m)
    res.traces["main"] = ctm.trace
    _aggregation(res, "main", ctm)
    res.check("vision share matches oracle", abs(m["vision_observed_share"] - m["vision_expected_share"]) <= m["vision_share_tolerance"],
              m["vision_observed_share"], m["vision_expected_share"])
    if not p["vision_submits"]:
        res.check("vision never broadcast", m["vision_broadcast_count"] == 0, m["vision_broadcast_count"], 0)
    if p["link"]:
        res.check("ball fetched without collision", m["fetch_success"], m["fetch_success"], True)
    if not p["controls"]:
        return res

    no_link = _blindsight_run({**p, "link": False})
    ml = _blindsight_metrics(no_link)
    res.traces["control-no-link"] = no_link.trace
    res.metrics["control_no_link_fetch_success"] = ml["fetch_success"]
    _aggregation(res, "control-no-link", no_link)
    res.check("control: without the link the walker collides", not ml["fetch_success"] and ml["collided"],
              ml["fetch_success"], False)

    enabled = _blindsight_run({**p, "vision_submits": True})
    me = _blindsight_metrics(enabled)
    res.traces["control-vision-submits"] = enabled.trace
    res.metrics["control_vision_broadcast_count"] = me["vision_broadcast_count"]
    res.metrics["control_vision_expected_share"] = me["vision_expected_share"]
    _aggregation(res, "control-vision-submits", enabled)
    res.check("control: restored Up-Tree access makes vision conscious", me["vision_broadcast_count"] > 0,
              me["vision_broadcast_count"], "> 0")
    res.check("control: vision share matches oracle",
              abs(me["vision_observed_share"] - me["vision_expected_share"]) <= me["vision_share_tolerance"],
              me["vision_observed_share"], me["vision_expected_share"])
    return res


INATTENTIONAL_DEFAULTS = {
    "seed": 11,
    "intensity_ratio": 11.0,
    "gorilla_weight": 1.0,
    "n_white": 9,
    "ticks": 400,
    "trials": 100_000,
    "controls": True,
}


def _gorilla_run(p: dict) -> tuple[Ctm, dict]:
    n = p["n_white"] + 1
    gw = float(p["gorilla_weight"])
    ww = gw * float(p["intensity_ratio"]) if gw > 0 else float(p["intensity_ratio"])
    roster = {
        a: ProcessorSpec("player_tracker", {"shirt": "white", "white_weight": ww, "black_weight": gw})
        for a in range(p["n_white"])
    }
    roster[n - 1] = ProcessorSpec("player_tracker", {"shirt": "black", "gorilla": True, "white_weight": ww, "black_weight": gw})
    ctm = _build(n, roster, p["seed"], p["ticks"])
    ctm.run(p["ticks"])
    level0 = [_record_chunk(e) for e in ctm.trace.filter("Submission", (0, 1))]
    f = ctm.config.f_spec
    oracle = float(exact_win_probabilities(level0, f, ctm.config.arity)[n - 1])
    closed = eval_f(f, level0[n - 1]) / math.fsum(eval_f(f, c) for c in level0)
    mc = float(monte_carlo_win_frequencies(level0, f, p["trials"], ctm.rng.spawn("gorilla-mc"), ctm.config.arity)[n - 1])
    share = group_share(ctm.trace, f, lambda e: e["address"] == n - 1)
    metrics = {
        "white_weight": ww,
        "gorilla_weight": gw,
        "oracle_gorilla_probability": oracle,
        "closed_form_probability": closed,
        "gorilla_win_rate": mc,
        "mc_trials": p["trials"],
        "mc_tolerance": float(mc_tolerance(np.array(oracle), p["trials"])),
        "machine_gorilla_rate": share["observed"],
        "machine_tolerance": share["tolerance"],
    }
    return ctm, metrics


def run_inattentional_blindness(intensity_ratio: float = 11.0, config_overrides: dict | None = None) -> ScenarioResult:
    """High-weight white-shirt gists crowd the low-weight gorilla out of STM."""
    p = _apply_overrides(INATTENTIONAL_DEFAULTS, {"intensity_ratio": intensity_ratio, **(config_overrides or {})})
    res = ScenarioResult("inattentional_blindness", p["seed"])
    ctm, m = _gorilla_run(p)
    res.metrics.update(m)
    res.traces["main"] = ctm.trace
    _aggregation(res, "main", ctm)
    res.check("oracle equals f/sum(f)", abs(m["oracle_gorilla_probability"] - m["closed_form_probability"]) <= 1e-12,
              m["oracle_gorilla_probability"], m["closed_form_probability"])
    res.check("Monte Carlo gorilla rate matches oracle",
              abs(m["gorilla_win_rate"] - m["oracle_gorilla_probability"]) <= m["mc_tolerance"] + 1e-12,
              m["gorilla_win_rate"], m["oracle_gorilla_probability"])
    res.check("machine gorilla rate matches oracle",
              abs(m["machine_gorilla_rate"] - m["oracle_gorilla_probability"]) <= m["machine_tolerance"],
              m["machine_gorilla_rate"], m["oracle_gorilla_probability"])
    res.check("gorilla probability at most 1%", m["oracle_gorilla_probability"] <= 0.01 + 1e-12,
              m["oracle_gorilla_probability"], "<= 0.01")
    if not p["controls"]:
        return res

    _, eq = _gorilla_run({**p, "intensity_ratio": 1.0, "ticks": 50})
    res.metrics["control_equal_weights_rate"] = eq["gorilla_win_rate"]
    res.metrics["control_equal_weights_oracle"] = eq["oracle_gorilla_probability"]
    res.check("control: equal weights give the gorilla 1/(n_white+1)",
              abs(eq["gorilla_win_rate"] - eq["oracle_gorilla_probability"]) <= eq["mc_tolerance"]
              and abs(eq["oracle_gorilla_probability"] - 1.0 / (p["n_white"] + 1)) <= 1e-12,
              eq["gorilla_win_rate"], eq["oracle_gorilla_probability"])
    res.check("control: with equal weights the gorilla is seen (> 1%)", eq["oracle_gorilla_probability"] > 0.01,
              eq["oracle_gorilla_probability"], "> 0.01")
    _, zero = _gorilla_run({**p, "gorilla_weight": 0.0, "ticks": 50})
    res.metrics["control_zero_weight_rate"] = zero["gorilla_win_rate"]
    res.check("control: zero-weight gorilla never wins", zero["gorilla_win_rate"] == 0.0 and zero["oracle_gorilla_probability"] == 0.0,
              zero["gorilla_win_rate"], 0.0)
    return res


CHANGE_DEFAULTS = {
    "seed": 5,
    "ticks": 120,
    "change_tick": 50,
    "prop_period": 10,
    "controls": True,
}


def _change_run(p: dict, change_tick: int | None, prop_period: int) -> Ctm:
    roster = {0: ProcessorSpec("scene_gist", {"weight": 20.0}), 1: ProcessorSpec("change_detector", {"weight": 100.0})}
    for a in range(2, 8):
        roster[a] = ProcessorSpec("background", {"weight": 1.0})
    ctm = _build(
        8, roster, p["seed"], p["ticks"],
        input_map={"frame": [0]},
        environment={"kind": "scene_stream", "params": {"change_tick": change_tick, "prop_period": prop_period}},
    )
    ctm.run(p["ticks"])
    return ctm


def _detections(ctm: Ctm) -> list[int]:
    return [e["tick"] for e in ctm.trace.of_kind("Broadcast") if e["address"] == 1]


def run_change_blindness(config_overrides: dict | None = None) -> ScenarioResult:
    """Detail changes that leave the scene gist intact go unnoticed."""
    p = _apply_overrides(CHANGE_DEFAULTS, config_overrides)
    res = ScenarioResult("change_blindness", p["seed"])
    ctm = _change_run(p, None, p["prop_period"])
    det = _detections(ctm)
    scene_share = group_share(ctm.trace, ctm.config.f_spec, lambda e: e["address"] == 0)
    res.metrics.update({
        "change_detected_broadcasts": len(det),
        "distinct_frames": len({e["gist"] for e in ctm.trace.of_kind("InputDelivery")}),
        "scene_share_observed": scene_share["observed"],
        "scene_share_expected": scene_share["expected"],
    })
    res.traces["main"] = ctm.trace
    _aggregation(res, "main", ctm)
    res.check("frames really changed", res.metrics["distinct_frames"] > 1, res.metrics["distinct_frames"], "> 1")
    res.check("no change detected on gist-stable stream", not det, len(det), 0)
    res.check("scene share matches oracle",
              abs(scene_share["observed"] - scene_share["expected"]) <= scene_share["tolerance"],
              scene_share["observed"], scene_share["expected"])
    if not p["controls"]:
        return res

    ctrl = _change_run(p, p["change_tick"], p["prop_period"])
    cdet = _detections(ctrl)
    bound = p["change_tick"] + ctrl.h + 1
    res.traces["control-gist-change"] = ctrl.trace
    res.metrics["control_change_detected_broadcasts"] = len(cdet)
    res.metrics["control_first_detection_tick"] = cdet[0] if cdet else -1
    _aggregation(res, "control-gist-change", ctrl)
    res.check("control: gist change is detected", len(cdet) >= 1, len(cdet), ">= 1")
    res.check("control: detection only after change reaches awareness", all(t > bound for t in cdet),
              cdet[0] if cdet else None, f"> {bound}")

    frozen = _change_run(p, None, 0)
    fdet = _detections(frozen)
    res.traces["control-identical-frames"] = frozen.trace
    res.metrics["identical_frames_detections"] = len(fdet)
    res.check("identical frames: no detection", not fdet, len(fdet), 0)
    return res


SLEEP_DEFAULTS = {
    "seed": 3,
    "awake_ticks": 100,
    "sleep_ticks": 120,
    "dream_ticks": 100,
    "tail_ticks": 40,
    "sleep_weight": 5000.0,
    "gate_weight": 100.0,
    "dream_weight": 60.0,
    "inner_weight": 30.0,
    "noise_tick": None,
    "with_sleep": True,
    "controls": True,
}

DREAM_GROUP = (1, 2)


def _sleep_run(p: dict) -> Ctm:
    total = p["awake_ticks"] + p["sleep_ticks"] + p["dream_ticks"] + p["tail_ticks"]
    sleep_spec = ProcessorSpec("sleep", {
        "awake_ticks": p["awake_ticks"], "sleep_ticks": p["sleep_ticks"], "dream_ticks": p["dream_ticks"],
        "sleep_weight": p["sleep_weight"], "gate_weight": p["gate_weight"], "notify": [1, 2],
    }) if p["with_sleep"] else ProcessorSpec("idle")
    roster = {
        0: sleep_spec,
        1: ProcessorSpec("dream_creator", {"weight": p["dream_weight"]}),
        2: ProcessorSpec("inner", {"weight": p["inner_weight"]}),
        3: ProcessorSpec("sensor_reporter", {"weight": 4.0}),
        4: ProcessorSpec("sensor_reporter", {"weight": 4.0}),
        5: ProcessorSpec("speaker", {"every": 5, "weight": 2.0}),
        6: ProcessorSpec("background", {"weight": 1.0}),
        7: ProcessorSpec("consistency", {"weight": 1.0}),
    }
    noise = [p["noise_tick"]] if p["noise_tick"] is not None else []
    ctm = _build(
        8, roster, p["seed"], total,
        input_map={"eyes": [3, 7], "ears": [4], "noise": [0, 4]},
        output_map={5: ["voice"]},
        links=[[0, 1], [0, 2]],
        environment={"kind": "day_world", "params": {"noise_ticks": noise}},
    )
    ctm.run(total)
    return ctm


def _phase_of(ctm: Ctm) -> dict[int, str]:
    beh = ctm.processors[0].behavior
    if isinstance(beh, Sleep):
        return dict(beh.log)
    return {t: "awake" for t in range(ctm.now)}


def _sleep_metrics(ctm: Ctm) -> dict:
    phase = _phase_of(ctm)
    f = ctm.config.f_spec
    asleep = {t for t, s in phase.items() if s == "asleep"}
    dream = {t for t, s in phase.items() if s == "dream"}
    nil = group_share(ctm.trace, f, lambda e: Gist.from_text(e["gist"]).is_nil, asleep)
    dreamers = group_share(ctm.trace, f, lambda e: e["address"] in DREAM_GROUP, dream)
    not_awake = asleep | dream
    # input gates act at the start of a tick, before the state can change
    inputs = [e for e in ctm.trace.of_kind("InputDelivery") if e["tick"] - 1 in not_awake]
    loud = [e for e in inputs if e["weight"] > ctm.processors[0].behavior.params.get("gate_weight", 100.0)] \
        if isinstance(ctm.processors[0].behavior, Sleep) else []
    cmds = [e for e in ctm.trace.of_kind("ActuatorCommand") if e["tick"] in not_awake]
    beh = ctm.processors[0].behavior
    return {
        "asleep_ticks": len(asleep),
        "dream_ticks": len(dream),
        "nil_share_asleep": nil["observed"],
        "nil_share_asleep_expected": nil["expected"],
        "nil_share_tolerance": nil["tolerance"],
        "dream_share": dreamers["observed"],
        "dream_share_expected": dreamers["expected"],
        "dream_share_tolerance": dreamers["tolerance"],
        "inputs_during_sleep": len(inputs) - len(loud),
        "loud_inputs_during_sleep": len(loud),
        "actuator_commands_during_sleep": len(cmds),
        "actuator_commands_total": len(ctm.trace.of_kind("ActuatorCommand")),
        "woken_by_noise_at": beh.woken_by_noise if isinstance(beh, Sleep) and beh.woken_by_noise is not None else -1,
    }


def run_sleep_dream_cycle(config_overrides: dict | None = None) -> ScenarioResult:
    """Awake -> dreamless sleep -> dream -> awake, driven by the Sleep processor."""
    p = _apply_overrides(SLEEP_DEFAULTS, config_overrides)
    res = ScenarioResult("sleep_dream", p["seed"])
    ctm = _sleep_run(p)
    m = _sleep_metrics(ctm)
    res.metrics.update(m)
    res.traces["main"] = ctm.trace
    _aggregation(res, "main", ctm)
    if p["with_sleep"]:
        res.check("sleep phase occurred", m["asleep_ticks"] > 0, m["asleep_ticks"], "> 0")
        res.check("asleep: STM holds NIL on >= 95% of ticks", m["nil_share_asleep"] >= 0.95, m["nil_share_asleep"], ">= 0.95")
        res.check("asleep: NIL share matches oracle",
                  abs(m["nil_share_asleep"] - m["nil_share_asleep_expected"]) <= m["nil_share_tolerance"],
                  m["nil_share_asleep"], m["nil_share_asleep_expected"])
        if p["noise_tick"] is None:
            res.check("dream phase occurred", m["dream_ticks"] > 0, m["dream_ticks"], "> 0")
            res.check("dreaming: Dream Creator + inner share >= 80%", m["dream_share"] >= 0.80, m["dream_share"], ">= 0.80")
            res.check("dreaming: share matches oracle",
                      abs(m["dream_share"] - m["dream_share_expected"]) <= m["dream_share_tolerance"],
                      m["dream_share"], m["dream_share_expected"])
        res.check("no ordinary inputs delivered while asleep", m["inputs_during_sleep"] == 0, m["inputs_during_sleep"], 0)
        res.check("no actuator commands while asleep or dreaming", m["actuator_commands_during_sleep"] == 0,
                  m["actuator_commands_during_sleep"], 0)
    else:
        res.check("without a Sleep processor no sleep phase occurs", m["asleep_ticks"] == 0 and m["dream_ticks"] == 0,
                  m["asleep_ticks"], 0)
    if not p["controls"]:
        return res

    noise_tick = p["awake_ticks"] + p["sleep_ticks"] // 2
    loud = _sleep_run({**p, "noise_tick": noise_tick})
    ml = _sleep_metrics(loud)
    res.traces["control-loud-noise"] = loud.trace
    res.metrics["control_noise_tick"] = noise_tick
    res.metrics["control_woken_at"] = ml["woken_by_noise_at"]
    _aggregation(res, "control-loud-noise", loud)
    res.check("control: loud noise passes the gate and wakes the machine",
              ml["woken_by_noise_at"] == noise_tick and ml["loud_inputs_during_sleep"] >= 1
              and _phase_of(loud).get(noise_tick + 1) == "awake",
              ml["woken_by_noise_at"], noise_tick)

    nosleep = _sleep_run({**p, "with_sleep": False})
    mn = _sleep_metrics(nosleep)
    res.traces["control-no-sleep-processor"] = nosleep.trace
    res.metrics["control_no_sleep_nil_installs"] = sum(
        1 for e in nosleep.trace.of_kind("StmInstall") if Gist.from_text(e["gist"]).is_nil)
    _aggregation(res, "control-no-sleep-processor", nosleep)
    res.check("control: without a Sleep processor no sleep phase occurs",
              mn["asleep_ticks"] == 0 and mn["actuator_commands_total"] > 0 and res.metrics["control_no_sleep_nil_installs"] == 0,
              res.metrics["control_no_sleep_nil_installs"], 0)
    return res


MEDITATION_DEFAULTS = {
    "seed": 13,
    "session_ticks": 300,
    "mmp_weight": 1.0,
    "other_weight": 4.0,
    "n_others": 7,
    "sea_period": 25,
    "share_threshold": 0.5,
    "controls": True,
}


def _meditation_machine(p: dict, mmp_weight: float) -> Ctm:
    roster = {0: ProcessorSpec("meditator", {"weight": mmp_weight})}
    for a in range(1, p["n_others"] + 1):
        roster[a] = ProcessorSpec("wanderer", {"weight": p["other_weight"]})
    return _build(p["n_others"] + 1, roster, p["seed"], 4 * p["session_ticks"], sea_period=p["sea_period"])


def _session(ctm: Ctm, ticks: int, threshold: float) -> dict:
    start = ctm.now
    others = [a for a in ctm.processors if a != 0]
    g0 = sum(ctm.processors[a].g for a in others) / len(others)
    ctm.run(start + ticks)
    f = ctm.config.f_spec
    thirds = []
    bounds = [start + ticks * i // 3 for i in range(4)]
    for lo, hi in zip(bounds, bounds[1:]):
        thirds.append(group_share(ctm.trace, f, lambda e: e["address"] == 0, set(range(lo, hi))))
    # first tick at which the oracle share of the meditator reaches the threshold
    reached = -1
    subs = _submissions(ctm.trace)
    for t in range(start, start + ticks):
        fv = [(eval_f(f, _record_chunk(e)), e["address"]) for e in subs[t]]
        total = math.fsum(v for v, _ in fv)
        if total > 0 and math.fsum(v for v, a in fv if a == 0) / total >= threshold:
            reached = t - start
            break
    g1 = sum(ctm.processors[a].g for a in others) / len(others)
    return {"thirds": thirds, "g_start": g0, "g_end": g1, "ticks_to_threshold": reached}


def run_meditation(session_ticks: int = 300, config_overrides: dict | None = None) -> ScenarioResult:
    """The meditator's broadcasts hush the other processors; its share of STM grows."""
    p = _apply_overrides(MEDITATION_DEFAULTS, {"session_ticks": session_ticks, **(config_overrides or {})})
    res = ScenarioResult("meditation", p["seed"])
    ctm = _meditation_machine(p, p["mmp_weight"])
    s1 = _session(ctm, p["session_ticks"], p["share_threshold"])
    shares = [t["observed"] for t in s1["thirds"]]
    for i, t in enumerate(s1["thirds"], start=1):
        res.metrics[f"mmp_stm_share_third{i}"] = t["observed"]
        res.metrics[f"mmp_stm_share_third{i}_expected"] = t["expected"]
    res.metrics["other_mean_g_start"] = s1["g_start"]
    res.metrics["other_mean_g_end"] = s1["g_end"]
    res.metrics["mmp_g_end"] = ctm.processors[0].g
    res.metrics["session1_ticks_to_threshold"] = s1["ticks_to_threshold"]
    res.traces["main"] = ctm.trace
    res.check("meditator share strictly increases across thirds", shares[0] < shares[1] < shares[2], shares, "increasing")
    for i, t in enumerate(s1["thirds"], start=1):
        res.check(f"third {i} share matches oracle", abs(t["observed"] - t["expected"]) <= t["tolerance"], t["observed"], t["expected"])
    res.check("other processors hushed (mean g decreased)", s1["g_end"] < s1["g_start"], s1["g_end"], f"< {s1['g_start']}")
    res.check("other g halved at least once", s1["g_end"] <= s1["g_start"] / ctm.config.c_sea, s1["g_end"], f"<= {s1['g_start'] / ctm.config.c_sea}")
    if not p["controls"]:
        _aggregation(res, "main", ctm)
        return res

    s2 = _session(ctm, p["session_ticks"], p["share_threshold"])
    res.metrics["session2_ticks_to_threshold"] = s2["ticks_to_threshold"]
    _aggregation(res, "main", ctm)
    res.check("practice: second session reaches the threshold sooner",
              0 <= s2["ticks_to_threshold"] < s1["ticks_to_threshold"], s2["ticks_to_threshold"], f"< {s1['ticks_to_threshold']}")

    zero = _meditation_machine(p, 0.0)
    sz = _session(zero, p["session_ticks"], p["share_threshold"])
    zshare = group_share(zero.trace, zero.config.f_spec, lambda e: e["address"] == 0)
    res.traces["control-zero-weight"] = zero.trace
    res.metrics["control_zero_weight_share"] = zshare["observed"]
    res.metrics["control_zero_weight_expected"] = zshare["expected"]
    res.metrics["control_zero_weight_other_g_end"] = sz["g_end"]
    _aggregation(res, "control-zero-weight", zero)
    res.check("control: zero-weight meditator gains no share and hushes no one",
              zshare["observed"] == zshare["expected"] == 0.0 and sz["g_end"] == sz["g_start"],
              zshare["observed"], 0.0)
    return res


SELF_MODEL_DEFAULTS = {
    "seed": 17,
    "ticks": 100,
    "arm_every": 10,
    "ball_every": 25,
    "ball_rate": 0.1,
    "self_threshold": SELF_THRESHOLD,
    "controls": True,
}


def _self_run(p: dict) -> Ctm:
    plans = []
    if p["ball_every"]:
        plans.append(["ball", p["ball_every"], 7])
    if p["arm_every"]:
        plans.append(["arm", p["arm_every"], 1])
    roster = {
        0: ProcessorSpec("motor", {"plans": plans, "weight": 40.0}),
        1: ProcessorSpec("world_model", {"self_threshold": p["self_threshold"], "window": RESPONSE_WINDOW}),
        2: ProcessorSpec("background", {"weight": 1.0}),
        3: ProcessorSpec("background", {"weight": 1.0}),
    }
    ctm = _build(
        4, roster, p["seed"], p["ticks"],
        input_map={"proprio": [1], "eyes": [1]},
        output_map={0: ["arm"]},
        environment={"kind": "arm_and_ball", "params": {"ball_rate": p["ball_rate"]}},
    )
    ctm.run(p["ticks"])
    return ctm


def _tags(ctm: Ctm) -> dict:
    wm = ctm.processors[1].behavior
    wm.retag()
    return {k: v for k, v in sorted(wm.entries.items())}


def run_self_model(config_overrides: dict | None = None) -> ScenarioResult:
    """The world model tags the responsive arm as self and the wandering ball as not-self."""
    p = _apply_overrides(SELF_MODEL_DEFAULTS, config_overrides)
    res = ScenarioResult("self_model", p["seed"])
    ctm = _self_run(p)
    tags = _tags(ctm)
    arm, ball = tags.get("arm"), tags.get("ball")
    command_share = group_share(ctm.trace, ctm.config.f_spec, lambda e: e["address"] == 0,
                                {t for t in range(p["ticks"]) if any(t % e == o for _, e, o in ctm.config.roster[0].params["plans"])})
    res.metrics.update({
        "arm_evidence": arm.evidence_count if arm else 0,
        "arm_misses": arm.misses if arm else 0,
        "arm_tag": arm.tag if arm else "unknown",
        "ball_evidence": ball.evidence_count if ball else 0,
        "ball_spontaneous": ball.spontaneous if ball else 0,
        "ball_misses": ball.misses if ball else 0,
        "ball_tag": ball.tag if ball else "unknown",
        "ctm_conscious": bool(tags.get("CTM") and tags["CTM"].conscious),
        "command_broadcast_share": command_share["observed"],
        "command_broadcast_expected": command_share["expected"],
    })
    res.traces["main"] = ctm.trace
    _aggregation(res, "main", ctm)
    res.check("arm tagged self", res.metrics["arm_tag"] == "self", res.metrics["arm_tag"], "self")
    res.check("arm evidence reaches threshold", res.metrics["arm_evidence"] >= p["self_threshold"], res.metrics["arm_evidence"], f">= {p['self_threshold']}")
    res.check("ball tagged not_self", res.metrics["ball_tag"] == "not_self", res.metrics["ball_tag"], "not_self")
    res.check("command broadcasts match oracle",
              abs(command_share["observed"] - command_share["expected"]) <= command_share["tolerance"],
              command_share["observed"], command_share["expected"])
    if not p["controls"]:
        return res

    idle = _self_run({**p, "arm_every": 0, "ball_every": 0, "ball_rate": 0.0})
    itags = _tags(idle)
    res.traces["control-no-activity"] = idle.trace
    _aggregation(res, "control-no-activity", idle)
    arm_tag = itags["arm"].tag if "arm" in itags else "unknown"
    ball_tag = itags["ball"].tag if "ball" in itags else "unknown"
    res.metrics["control_idle_arm_tag"] = arm_tag
    res.metrics["control_idle_ball_tag"] = ball_tag
    res.check("control: zero activity leaves everything unknown", arm_tag == ball_tag == "unknown", [arm_tag, ball_tag], "unknown")
    return res


SCENARIOS: dict[str, Callable[..., ScenarioResult]] = {
    "blindsight": run_blindsight,
    "inattentional_blindness": lambda overrides=None: run_inattentional_blindness(
        (overrides or {}).get("intensity_ratio", 11.0),
        {k: v for k, v in (overrides or {}).items() if k != "intensity_ratio"}),
    "change_blindness": run_change_blindness,
    "sleep_dream": run_sleep_dream_cycle,
    "meditation": lambda overrides=None: run_meditation(
        (overrides or {}).get("session_ticks", 300),
        {k: v for k, v in (overrides or {}).items() if k != "session_ticks"}),
    "self_model": run_self_model,
}


def run_scenario(name: str, seed: int | None = None, overrides: dict | None = None) -> ScenarioResult:
    if name not in SCENARIOS:
        raise KeyError(name)
    params = dict(overrides or {})
    if seed is not None:
        params["seed"] = seed
    return SCENARIOS[name](params)
