"""The clocked machine: STM, LTM processors, Up-Tree, broadcast, links,
input and output maps, and the per-tick pipeline that ties them together."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .core import NIL, Chunk, CompetitionFunctionSpec, FKind, Rng
from .environment import Environment, make_environment
from .processors import (
    C_SEA,
    G_MAX,
    G_MIN,
    LINK_THRESHOLD,
    MIN_MEMORY_CAPACITY,
    Acknowledgement,
    Command,
    LinkMessage,
    MemoryStore,
    Processor,
    StepContext,
    acknowledge_useful,
    apply_feedback,
    form_link,
    generate_feedback,
    make_behavior,
    make_submission,
    receive_broadcast,
    receive_input,
    receive_link,
)
from .trace import (
    PHASE_DELIVER,
    PHASE_FEEDBACK,
    PHASE_INPUT,
    PHASE_OUTPUT,
    PHASE_STEP,
    PHASE_STM,
    PHASE_TREE,
    Trace,
    chunk_fields,
)
from .uptree import Mode, UpTree, build_uptree

CONFIG_SCHEMA_VERSION = 1
DEFAULT_LIFETIME = 10_000


class ConfigError(ValueError):
    """Invalid machine configuration; ``problems`` lists (field, message)."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{f}: {m}" for f, m in problems))


@dataclass
class ProcessorSpec:
    behavior: str = "idle"
    params: dict = field(default_factory=dict)
    specialty: str = ""
    submit_enabled: bool = True


@dataclass
class CtmConfig:
    n_processors: int
    arity: int = 2
    tick_ms: float = 100.0
    lifetime: int = DEFAULT_LIFETIME
    f_spec: CompetitionFunctionSpec = field(default_factory=CompetitionFunctionSpec.intensity)
    mode: Mode = Mode.PROBABILISTIC
    seed: int = 0
    link_threshold: int = LINK_THRESHOLD
    c_sea: float = C_SEA
    g_min: float = G_MIN
    g_max: float = G_MAX
    sea_period: int = 1
    memory_capacity: int | None = None
    roster: dict = field(default_factory=dict)  # address -> ProcessorSpec
    input_map: dict = field(default_factory=dict)  # sensor -> [addresses]
    output_map: dict = field(default_factory=dict)  # address -> [actuators]
    links: list = field(default_factory=list)  # pre-formed [a, b] pairs
    environment: dict = field(default_factory=lambda: {"kind": "none", "params": {}})

    def validate(self) -> None:
        problems = []
        if self.n_processors < 1:
            problems.append(("n_processors", "must be >= 1"))
        if self.arity < 2:
            problems.append(("arity", "must be >= 2"))
        if self.tick_ms <= 0:
            problems.append(("tick_ms", "must be positive"))
        if self.link_threshold < 1:
            problems.append(("link_threshold", "must be >= 1"))
        if self.c_sea <= 1:
            problems.append(("c_sea", "must be > 1"))
        if not 0 < self.g_min <= 1 <= self.g_max:
            problems.append(("g_min/g_max", "need 0 < g_min <= 1 <= g_max"))
        if self.sea_period < 1:
            problems.append(("sea_period", "must be >= 1"))
        if not problems:
            h = build_uptree(self.n_processors, self.arity).height
            if self.lifetime < h:
                problems.append(("lifetime", f"T={self.lifetime} is shorter than one competition (h={h})"))
        n = self.n_processors
        for addr, spec in self.roster.items():
            if not isinstance(addr, int) or not 0 <= addr < n:
                problems.append((f"roster.{addr}", "unknown processor address"))
            elif not isinstance(spec, ProcessorSpec):
                problems.append((f"roster.{addr}", "expected a processor spec"))
        for sensor, dests in self.input_map.items():
            for d in dests:
                if not 0 <= d < n:
                    problems.append((f"input_map.{sensor}", f"unknown processor address {d}"))
        for addr in self.output_map:
            if not 0 <= addr < n:
                problems.append((f"output_map.{addr}", "unknown processor address"))
        for pair in self.links:
            if len(pair) != 2 or pair[0] == pair[1] or not all(0 <= a < n for a in pair):
                problems.append(("links", f"bad link {pair!r}"))
        if problems:
            raise ConfigError(problems)


def config_from_dict(data: dict) -> CtmConfig:
    """Build a config from the structure of a YAML config file."""
    problems = []
    version = data.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError([("schema_version", f"unsupported version {version!r}")])
    known = {
        "schema_version", "n_processors", "arity", "tick_ms", "lifetime", "f", "mode", "seed",
        "link_threshold", "c_sea", "g_min", "g_max", "sea_period", "memory_capacity", "roster",
        "input_map", "output_map", "links", "environment",
    }
    for key in data:
        if key not in known:
            problems.append((str(key), "unknown field"))
    if "n_processors" not in data:
        problems.append(("n_processors", "required"))
    if problems:
        raise ConfigError(problems)
    f = data.get("f", "intensity")
    try:
        if isinstance(f, dict):
            f_spec = CompetitionFunctionSpec(FKind(f.get("kind", "intensity+c*mood")), float(f.get("c", 0.0)))
        else:
            f_spec = CompetitionFunctionSpec.parse(str(f))
    except ValueError as exc:
        raise ConfigError([("f", str(exc))]) from None
    roster = {}
    for addr, spec in (data.get("roster") or {}).items():
        spec = spec or {}
        roster[int(addr)] = ProcessorSpec(
            behavior=spec.get("behavior", "idle"),
            params=dict(spec.get("params") or {}),
            specialty=str(spec.get("specialty", "")),
            submit_enabled=bool(spec.get("submit_enabled", True)),
        )
    try:
        mode = Mode(data.get("mode", "probabilistic"))
    except ValueError:
        raise ConfigError([("mode", f"unknown mode {data.get('mode')!r}")]) from None
    cfg = CtmConfig(
        n_processors=int(data["n_processors"]),
        arity=int(data.get("arity", 2)),
        tick_ms=float(data.get("tick_ms", 100.0)),
        lifetime=int(data.get("lifetime", DEFAULT_LIFETIME)),
        f_spec=f_spec,
        mode=mode,
        seed=int(data.get("seed", 0)),
        link_threshold=int(data.get("link_threshold", LINK_THRESHOLD)),
        c_sea=float(data.get("c_sea", C_SEA)),
        g_min=float(data.get("g_min", G_MIN)),
        g_max=float(data.get("g_max", G_MAX)),
        sea_period=int(data.get("sea_period", 1)),
        memory_capacity=data.get("memory_capacity"),
        roster=roster,
        input_map={str(k): [int(a) for a in v] for k, v in (data.get("input_map") or {}).items()},
        output_map={int(k): [str(a) for a in (v if isinstance(v, list) else [v])] for k, v in (data.get("output_map") or {}).items()},
        links=[list(map(int, p)) for p in (data.get("links") or [])],
        environment=dict(data.get("environment") or {"kind": "none"}),
    )
    cfg.validate()
    return cfg


def config_to_dict(cfg: CtmConfig) -> dict:
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "n_processors": cfg.n_processors,
        "arity": cfg.arity,
        "tick_ms": cfg.tick_ms,
        "lifetime": cfg.lifetime,
        "f": {"kind": cfg.f_spec.kind.value, "c": cfg.f_spec.c},
        "mode": cfg.mode.value,
        "seed": cfg.seed,
        "link_threshold": cfg.link_threshold,
        "c_sea": cfg.c_sea,
        "g_min": cfg.g_min,
        "g_max": cfg.g_max,
        "sea_period": cfg.sea_period,
        "memory_capacity": cfg.memory_capacity,
        "roster": {
            a: {"behavior": s.behavior, "params": s.params, "specialty": s.specialty, "submit_enabled": s.submit_enabled}
            for a, s in sorted(cfg.roster.items())
        },
        "input_map": cfg.input_map,
        "output_map": cfg.output_map,
        "links": cfg.links,
        "environment": cfg.environment,
    }


def load_config(path: str | Path) -> CtmConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "expected a mapping")])
    return config_from_dict(data)


@dataclass
class Stm:
    chunk: Chunk
    installed_at: int | None = None


NIL_CHUNK = Chunk(0, 0, NIL, 0.0, 0.0, 0.0)


@dataclass
class MoodReading:
    tick: int
    mood: float
    intensity: float
    label: str
    chunk: Chunk


@dataclass
class TickReport:
    tick: int
    installed: Chunk | None
    delivered: Chunk | None
    submissions: list
    commands: list


class Ctm:
    def __init__(self, config: CtmConfig):
        config.validate()
        self.config = config
        self.tree: UpTree = build_uptree(config.n_processors, config.arity, config.f_spec, config.mode)
        self.h = self.tree.height
        self.rng = Rng(config.seed)
        self.tree_rng = self.rng.spawn("uptree")
        self.now = 0
        self.stm = Stm(NIL_CHUNK)
        self.stm_history: dict[int, Chunk] = {}
        self.trace = Trace(header={"seed": config.seed, "n_processors": config.n_processors, "arity": config.arity, "height": self.h})
        capacity = config.memory_capacity or max(MIN_MEMORY_CAPACITY, config.lifetime // 4)
        self.processors: dict[int, Processor] = {}
        self.proc_rngs: dict[int, Rng] = {}
        for addr in range(config.n_processors):
            spec = config.roster.get(addr, ProcessorSpec())
            self.processors[addr] = Processor(
                address=addr,
                behavior=make_behavior(spec.behavior, spec.params),
                specialty=spec.specialty,
                c_sea=config.c_sea,
                g_min=config.g_min,
                g_max=config.g_max,
                submit_enabled=spec.submit_enabled,
                memory=MemoryStore(capacity),
            )
            self.proc_rngs[addr] = self.rng.spawn(f"processor:{addr}")
        for a, b in config.links:
            form_link(self.processors[a], self.processors[b])
        env = config.environment or {}
        self.env: Environment = make_environment(env.get("kind", "none"), env.get("params"))
        self.env.bind(self.rng.spawn("environment"))
        self._pending_broadcast: Chunk | None = None
        self._pending_links: list[LinkMessage] = []
        self._feedback_buffer: dict[int, list] = {a: [] for a in self.processors}

    # -- gates --

    def _admitted(self, hook: str, item) -> bool:
        for addr in sorted(self.processors):
            p = self.processors[addr]
            verdict = getattr(p.behavior, hook)(p, item)
            if verdict is False:
                return False
        return True

    def tick(self) -> TickReport:
        t = self.now
        if t >= self.config.lifetime:
            raise RuntimeError(f"machine died at T={self.config.lifetime}")
        trace = self.trace
        procs = self.processors
        ctxs = {a: StepContext(p, t, self.proc_rngs[a]) for a, p in procs.items()}

        # 1. sensors -> input maps -> inboxes
        readings = self.env.sense(t)
        for reading in readings:
            dests = self.config.input_map.get(reading.sensor, [])
            if not dests or not self._admitted("admit_input", reading):
                continue
            for d in dests:
                procs[d].inbox.append(("input", reading))
                trace.emit(t, PHASE_INPUT, "InputDelivery", sensor=reading.sensor, address=d,
                           weight=float(reading.weight), gist=reading.gist.to_text())

        # 2. last tick's broadcast and link sends
        delivered = self._pending_broadcast
        self._pending_broadcast = None
        if delivered is not None:
            trace.emit(t, PHASE_DELIVER, "Broadcast", **chunk_fields(delivered), receivers=len(procs))
            for a in sorted(procs):
                procs[a].inbox.append(("broadcast", delivered))
        for msg in self._pending_links:
            procs[msg.receiver].inbox.append(("link", msg.chunk))
        self._pending_links = []

        # 3. processor steps (effects buffered)
        submissions = []
        for a in sorted(procs):
            p, ctx = procs[a], ctxs[a]
            while p.inbox:
                what, item = p.inbox.popleft()
                if what == "input":
                    receive_input(p, item, ctx)
                elif what == "broadcast":
                    receive_broadcast(p, item, ctx)
                else:
                    receive_link(p, item, ctx)
            chunk = make_submission(p, ctx)
            submissions.append(chunk)
            trace.emit(t, PHASE_STEP, "Submission", **chunk_fields(chunk), g=p.g)
        effects = [e for a in sorted(procs) for e in ctxs[a].effects]
        acks = sorted((e for e in effects if isinstance(e, Acknowledgement)), key=lambda e: (e.sender, e.receiver))
        for ack in acks:
            if acknowledge_useful(procs[ack.sender], procs[ack.receiver], t, self.config.link_threshold):
                trace.emit(t, PHASE_STEP, "LinkFormed", a=min(ack.sender, ack.receiver), b=max(ack.sender, ack.receiver))
        sends = sorted((e for e in effects if isinstance(e, LinkMessage)), key=lambda e: (e.sender, e.receiver))
        for msg in sends:
            trace.emit(t, PHASE_STEP, "LinkSend", sender=msg.sender, receiver=msg.receiver,
                       deliver_at=t + 1, gist=msg.chunk.gist.to_text(), weight=float(msg.chunk.weight))
        self._pending_links = sends
        commands = [e for e in effects if isinstance(e, Command)]

        # 4. Up-Tree: new competition enters level 0, pipeline advances
        self.tree.submit_level0(submissions, t)
        winner = self.tree.advance(self.tree_rng)
        for nw in self.tree.last_node_wins:
            trace.emit(t, PHASE_TREE, "NodeWin", level=nw.level, node=nw.node, start=nw.start_tick, address=nw.address)

        # 5. STM install; broadcast goes out next tick
        if winner is not None:
            self.stm = Stm(winner, t)
            self.stm_history[t] = winner
            self._pending_broadcast = winner
            trace.emit(t, PHASE_STM, "StmInstall", **chunk_fields(winner))

        # 6. output maps -> actuators
        issued = []
        for cmd in commands:
            if cmd.actuator not in self.config.output_map.get(cmd.source, []):
                continue
            if not self._admitted("admit_output", cmd):
                continue
            self.env.actuate(t, cmd.actuator, cmd.command)
            issued.append(cmd)
            trace.emit(t, PHASE_OUTPUT, "ActuatorCommand", source=cmd.source, actuator=cmd.actuator, command=cmd.command)
        self.env.evolve(t)

        # 7. Sleeping Experts feedback
        period = self.config.sea_period
        for a in sorted(procs):
            p = procs[a]
            buf = self._feedback_buffer[a]
            buf.extend(p.pending_feedback)
            p.pending_feedback = []
            buf.extend(generate_feedback(p, (t, t + 1)))
            if (t + 1) % period == 0 and buf:
                for fb in apply_feedback(p, buf, collapse=period > 1):
                    trace.emit(t, PHASE_FEEDBACK, "FeedbackApplied", address=a, verdict=fb.verdict.value,
                               ref=fb.ref_tick, reason=fb.reason, g=p.g)
                buf.clear()

        self.now += 1
        return TickReport(t, winner, delivered, submissions, issued)

    def run(self, until_tick: int) -> Trace:
        if until_tick > self.config.lifetime:
            raise ValueError(f"until_tick {until_tick} exceeds lifetime {self.config.lifetime}")
        while self.now < until_tick:
            self.tick()
        return self.trace

    def mood_reading(self, tick: int) -> MoodReading:
        if tick < self.h:
            raise ValueError(f"no conscious content before tick h={self.h}")
        if tick >= self.now:
            raise ValueError(f"tick {tick} has not run yet")
        chunk = self.stm_history[tick]
        label = "optimistic" if chunk.mood > 0 else "pessimistic" if chunk.mood < 0 else "neutral"
        return MoodReading(tick, chunk.mood, chunk.intensity, label, chunk)


def new_ctm(config: CtmConfig) -> Ctm:
    return Ctm(config)


def run(ctm: Ctm, until_tick: int) -> Trace:
    return ctm.run(until_tick)


def mood_reading(ctm: Ctm, tick: int) -> MoodReading:
    return ctm.mood_reading(tick)


def check_aggregation(trace: Trace, h: int, tol: float = 1e-9) -> list[str]:
    """Mismatches between each STM chunk and the sums of the submissions h ticks earlier.

    Recomputed from Submission events only, independent of the tree.
    """
    subs: dict[int, list[dict]] = {}
    for e in trace.events:
        if e["kind"] == "Submission":
            subs.setdefault(e["tick"], []).append(e)
    problems = []
    for e in trace.events:
        if e["kind"] != "StmInstall":
            continue
        src = subs.get(e["tick"] - h, [])
        mood = sum(s["weight"] for s in src)
        intensity = sum(abs(s["weight"]) for s in src)
        if e["t"] != e["tick"] - h:
            problems.append(f"tick {e['tick']}: STM chunk submitted at {e['t']}, expected {e['tick'] - h}")
        if abs(e["mood"] - mood) > tol or abs(e["intensity"] - intensity) > tol:
            problems.append(f"tick {e['tick']}: STM mood/intensity {e['mood']}/{e['intensity']} vs {mood}/{intensity}")
    return problems

