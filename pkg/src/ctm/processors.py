"""LTM processors: submission, broadcast reception, memory, links and the
Sleeping Experts weight-giving power."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable

from .core import NIL, Chunk, Gist, Rng, gist, make_chunk

LINK_THRESHOLD = 3
C_SEA = 2.0
G_MIN = 2.0 ** -20
G_MAX = 2.0 ** 20
RECENCY_WINDOW = 32
MIN_MEMORY_CAPACITY = 256


class Verdict(str, Enum):
    EMBOLDEN = "embolden"
    HUSH = "hush"


@dataclass(frozen=True)
class Feedback:
    verdict: Verdict
    ref_tick: int
    reason: str = ""


class RecordKind(str, Enum):
    SUBMITTED = "submitted"
    BROADCAST_RECEIVED = "broadcast_received"
    LINK_RECEIVED = "link_received"
    INPUT_RECEIVED = "input_received"


@dataclass(frozen=True)
class MemoryRecord:
    tick: int
    kind: RecordKind
    chunk: Chunk

    @property
    def salient(self) -> bool:
        return bool(self.chunk.gist.salience_flags)


@dataclass
class LinkState:
    peer: int
    usefulness_count: int = 0
    strength: int = 0
    formed: bool = False


@dataclass(frozen=True)
class Sensation:
    """One sensor reading routed by an input map."""

    sensor: str
    tick: int
    values: tuple = ()
    gist: Gist = NIL
    weight: float = 0.0

    def value(self, name: str, default: float | None = None) -> float | None:
        return dict(self.values).get(name, default)


# -- effects: buffered during a processor step, applied at the tick barrier --

@dataclass(frozen=True)
class LinkMessage:
    sender: int
    receiver: int
    chunk: Chunk
    sent_tick: int


@dataclass(frozen=True)
class Acknowledgement:
    sender: int
    receiver: int
    tick: int


@dataclass(frozen=True)
class Command:
    source: int
    actuator: str
    command: str
    tick: int


class MemoryStore:
    """Bounded record of what a processor submitted, received and perceived."""

    def __init__(self, capacity: int = MIN_MEMORY_CAPACITY, recency_window: int = RECENCY_WINDOW):
        if capacity < 2:
            raise ValueError("memory capacity must be at least 2")
        self.capacity = capacity
        self.recency_window = recency_window
        self.records: list[MemoryRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def add(self, record: MemoryRecord) -> None:
        if len(self.records) >= self.capacity:
            self.prune()
        self.records.append(record)

    def prune(self) -> int:
        """Keep salient, top-decile and recent records; returns the retained count.

        A no-op below capacity.  If the kept set is still too large, records
        are dropped oldest-first: unflagged old ones, then unflagged recent
        ones, and flagged ones only as a last resort.
        """
        recs = self.records
        if len(recs) < self.capacity:
            return len(recs)
        latest = max(r.tick for r in recs)
        recent = [r.tick > latest - self.recency_window for r in recs]
        mags = sorted(abs(r.chunk.weight) for r in recs)
        cut = mags[len(mags) - math.ceil(len(mags) / 10)]
        top = [abs(r.chunk.weight) >= cut and cut > mags[0] for r in recs]
        keep = [r.salient or recent[i] or top[i] for i, r in enumerate(recs)]
        limit = self.capacity - 1
        for tier in (
            lambda i: not recs[i].salient and not recent[i],
            lambda i: not recs[i].salient,
            lambda i: True,
        ):
            excess = sum(keep) - limit
            if excess <= 0:
                break
            for i in range(len(recs)):
                if excess <= 0:
                    break
                if keep[i] and tier(i):
                    keep[i] = False
                    excess -= 1
        self.records = [r for i, r in enumerate(recs) if keep[i]]
        return len(self.records)

    def story(self, lo: int | None = None, hi: int | None = None) -> list[Gist]:
        return [
            r.chunk.gist
            for r in sorted(self.records, key=lambda r: r.tick)
            if (lo is None or r.tick >= lo) and (hi is None or r.tick < hi)
        ]


BEHAVIORS: dict[str, type] = {}


def register(kind: str) -> Callable[[type], type]:
    def deco(cls):
        cls.kind = kind
        BEHAVIORS[kind] = cls
        return cls

    return deco


def make_behavior(kind: str, params: dict | None = None) -> "Behavior":
    try:
        cls = BEHAVIORS[kind]
    except KeyError:
        raise ValueError(f"unknown behavior kind {kind!r}; known: {sorted(BEHAVIORS)}") from None
    return cls(**(params or {}))


class StepContext:
    """Handle a behavior uses to act during one processor step."""

    def __init__(self, proc: "Processor", tick: int, rng: Rng):
        self.proc = proc
        self.tick = tick
        self.rng = rng
        self.effects: list = []

    def send_link(self, peer: int, g: Gist, weight: float = 0.0) -> None:
        chunk = make_chunk(self.proc.address, self.tick, g, weight)
        self.effects.append(send_via_link(self.proc, peer, chunk, self.tick))

    def acknowledge(self, peer: int) -> None:
        if peer != self.proc.address:
            self.effects.append(Acknowledgement(self.proc.address, peer, self.tick))

    def command(self, actuator: str, command: str) -> None:
        self.effects.append(Command(self.proc.address, actuator, command, self.tick))


class Behavior:
    """Scenario-supplied policy plugged into a processor.

    Subclasses override the hooks they need; defaults submit a NIL chunk of
    weight zero and ignore everything received.
    """

    kind = "idle"

    def __init__(self, **params: Any):
        self.params = params

    def on_input(self, proc: "Processor", event: Sensation, ctx: StepContext) -> None:
        pass

    def on_broadcast(self, proc: "Processor", chunk: Chunk, ctx: StepContext) -> None:
        pass

    def on_link(self, proc: "Processor", chunk: Chunk, ctx: StepContext) -> None:
        pass

    def propose(self, proc: "Processor", ctx: StepContext) -> tuple[Gist, float]:
        return NIL, 0.0

    def assess(self, proc: "Processor", chunk: Chunk) -> float | None:
        """Ground-truth value of a chunk in this processor's opinion (None: no opinion)."""
        return None

    def admit_input(self, proc: "Processor", event: Sensation) -> bool | None:
        return None

    def admit_output(self, proc: "Processor", command: Command) -> bool | None:
        return None


@dataclass
class Processor:
    address: int
    behavior: Behavior = field(default_factory=Behavior)
    specialty: str = ""
    g: float = 1.0
    c_sea: float = C_SEA
    g_min: float = G_MIN
    g_max: float = G_MAX
    submit_enabled: bool = True
    memory: MemoryStore = field(default_factory=MemoryStore)
    links: dict = field(default_factory=dict)
    inbox: deque = field(default_factory=deque)
    # SEA bookkeeping
    own_submissions: dict = field(default_factory=dict)
    broadcasts_by_competition: dict = field(default_factory=dict)
    received: list = field(default_factory=list)
    pending_feedback: list = field(default_factory=list)
    emitted: set = field(default_factory=set)
    sea_history: int = 0  # net embolden count since birth

    def link(self, peer: int) -> LinkState:
        if peer not in self.links:
            self.links[peer] = LinkState(peer)
        return self.links[peer]

    def linked_to(self, peer: int) -> bool:
        return peer in self.links and self.links[peer].formed


def make_submission(proc: Processor, ctx: StepContext) -> Chunk:
    """Submit this tick's chunk: weight = g * base weight (zero if Up-Tree access is broken)."""
    g_, base = proc.behavior.propose(proc, ctx)
    weight = proc.g * base if proc.submit_enabled else 0.0
    chunk = make_chunk(proc.address, ctx.tick, g_, weight)
    proc.memory.add(MemoryRecord(ctx.tick, RecordKind.SUBMITTED, chunk))
    proc.own_submissions[ctx.tick] = chunk
    _trim(proc.own_submissions, ctx.tick)
    return chunk


def receive_broadcast(proc: Processor, chunk: Chunk, ctx: StepContext) -> list:
    """Store the broadcast, let the behavior react; returns buffered effects."""
    start = len(ctx.effects)
    proc.memory.add(MemoryRecord(ctx.tick, RecordKind.BROADCAST_RECEIVED, chunk))
    proc.broadcasts_by_competition[chunk.t] = chunk
    _trim(proc.broadcasts_by_competition, ctx.tick)
    proc.received.append((ctx.tick, chunk))
    if len(proc.received) > 1024:
        del proc.received[:512]
    if is_hush_broadcast(chunk) and chunk.address != proc.address:
        proc.pending_feedback.append(Feedback(Verdict.HUSH, chunk.t, f"broadcast from {chunk.address}"))
    proc.behavior.on_broadcast(proc, chunk, ctx)
    return ctx.effects[start:]


def is_hush_broadcast(chunk: Chunk) -> bool:
    return "command" in chunk.gist.modality_tags and chunk.gist.payload.startswith("hush")


def receive_link(proc: Processor, chunk: Chunk, ctx: StepContext) -> list:
    start = len(ctx.effects)
    proc.memory.add(MemoryRecord(ctx.tick, RecordKind.LINK_RECEIVED, chunk))
    proc.behavior.on_link(proc, chunk, ctx)
    return ctx.effects[start:]


def receive_input(proc: Processor, event: Sensation, ctx: StepContext) -> list:
    start = len(ctx.effects)
    proc.memory.add(MemoryRecord(ctx.tick, RecordKind.INPUT_RECEIVED, make_chunk(proc.address, ctx.tick, event.gist, event.weight)))
    proc.behavior.on_input(proc, event, ctx)
    return ctx.effects[start:]


def _trim(d: dict, tick: int, horizon: int = 512) -> None:
    if len(d) > 2 * horizon:
        for k in [k for k in d if k < tick - horizon]:
            del d[k]


def acknowledge_useful(a: Processor, b: Processor, tick: int, threshold: int = LINK_THRESHOLD) -> bool:
    """Count one useful answer from b; returns True when this acknowledgement formed the link."""
    if a.address == b.address:
        raise ValueError("a processor cannot acknowledge itself")
    la, lb = a.link(b.address), b.link(a.address)
    if la.formed:
        la.strength += 1
        lb.strength = la.strength
        la.usefulness_count += 1
        return False
    la.usefulness_count += 1
    if la.usefulness_count >= threshold:
        la.formed = lb.formed = True
        return True
    return False


def form_link(a: Processor, b: Processor) -> None:
    """Pre-form a link (scenario set-up)."""
    a.link(b.address).formed = True
    b.link(a.address).formed = True


def remove_link(a: Processor, b: Processor) -> None:
    a.links.pop(b.address, None)
    b.links.pop(a.address, None)


def send_via_link(a: Processor, b_address: int, chunk: Chunk, tick: int) -> LinkMessage:
    """Unconscious send; delivery happens at tick + 1 (applied by the machine)."""
    if b_address == a.address:
        raise ValueError("a processor cannot send to itself over a link")
    if not a.linked_to(b_address):
        raise ValueError(f"no formed link {a.address} <-> {b_address}")
    return LinkMessage(a.address, b_address, chunk, tick)


def sea_update(proc: Processor, feedback: Feedback) -> float:
    if proc.g <= 0:
        raise ValueError("weight-giving power must stay positive")
    if feedback.verdict is Verdict.EMBOLDEN:
        proc.g = min(proc.g * proc.c_sea, proc.g_max)
        proc.sea_history += 1
    else:
        proc.g = max(proc.g / proc.c_sea, proc.g_min)
        proc.sea_history -= 1
    return proc.g


def generate_feedback(proc: Processor, tick_window: tuple[int, int]) -> list[Feedback]:
    """SEA verdicts for broadcasts received in ``[lo, hi)``.

    Embolden: our chunk lost a competition although it was worth more than
    the winner.  Hush: our chunk won, and a later broadcast referring to the
    same competition turned out to be worth more.  Each (verdict, tick)
    pair is reported once.
    """
    lo, hi = tick_window
    beh = proc.behavior
    out = []
    for recv_tick, b in proc.received:
        if not lo <= recv_tick < hi:
            continue
        own = proc.own_submissions.get(b.t)
        if own is not None and b.address != proc.address:
            mine, theirs = beh.assess(proc, own), beh.assess(proc, b)
            if mine is not None and theirs is not None and mine > theirs:
                out.append(Feedback(Verdict.EMBOLDEN, b.t, "lost to a less valuable chunk"))
        ref = b.gist.ref_tick()
        if ref is not None and b.address != proc.address:
            won = proc.broadcasts_by_competition.get(ref)
            own = proc.own_submissions.get(ref)
            if won is not None and own is not None and won.address == proc.address:
                mine, theirs = beh.assess(proc, own), beh.assess(proc, b)
                if mine is not None and theirs is not None and mine < theirs:
                    out.append(Feedback(Verdict.HUSH, ref, "won over a more valuable chunk"))
    fresh = []
    for fb in out:
        key = (fb.verdict, fb.ref_tick)
        if key not in proc.emitted:
            proc.emitted.add(key)
            fresh.append(fb)
    return fresh


def prune_memory(proc: Processor) -> int:
    return proc.memory.prune()


def high_level_story(proc: Processor, tick_range: tuple[int, int] | None = None) -> list[Gist]:
    if tick_range is None:
        return proc.memory.story()
    return proc.memory.story(*tick_range)


# -- generic behaviors usable from configuration files --

@register("idle")
class Idle(Behavior):
    pass


@register("constant")
class Constant(Behavior):
    """Submits the same gist and base weight every tick."""

    def propose(self, proc, ctx):
        p = self.params
        return gist(p.get("modality", "speech"), p.get("payload", f"p{proc.address}")), float(p.get("weight", 1.0))


@register("scripted")
class Scripted(Behavior):
    """Cycles through a list of base weights (optionally with gist payloads)."""

    def propose(self, proc, ctx):
        weights = self.params.get("weights", [1.0])
        w = float(weights[ctx.tick % len(weights)])
        payloads = self.params.get("payloads")
        payload = payloads[ctx.tick % len(payloads)] if payloads else f"p{proc.address} t{ctx.tick}"
        return gist(self.params.get("modality", "speech"), payload), w


@register("random")
class RandomWeight(Behavior):
    """Uniform random base weight in [low, high] from the processor's own stream."""

    def propose(self, proc, ctx):
        lo, hi = float(self.params.get("low", -10.0)), float(self.params.get("high", 10.0))
        w = lo + (hi - lo) * ctx.rng.random()
        return gist("speech", f"p{proc.address} t{ctx.tick}"), w


@register("querier")
class Querier(Behavior):
    """Asks a question every ``every`` ticks; acknowledges whoever answers it.

    Once a link to the answerer exists, questions go over the link instead
    of through the competition.
    """

    def __init__(self, **params):
        super().__init__(**params)
        self.answered_by: list[tuple[int, int]] = []
        self.asking = False

    def propose(self, proc, ctx):
        every = int(self.params.get("every", 5))
        topic = self.params.get("topic", "name")
        self.asking = False
        if ctx.tick % every == 0:
            peers = [p for p, ls in sorted(proc.links.items()) if ls.formed]
            if peers:
                ctx.send_link(peers[0], gist("query", f"{topic}?"))
            else:
                self.asking = True
                return gist("query", f"{topic}?"), float(self.params.get("weight", 50.0))
        return NIL, 0.0

    def _take_answer(self, proc, chunk, ctx, channel):
        if "answer" in chunk.gist.modality_tags and chunk.address != proc.address:
            self.answered_by.append((ctx.tick, chunk.address))
            ctx.acknowledge(chunk.address)

    def on_broadcast(self, proc, chunk, ctx):
        self._take_answer(proc, chunk, ctx, "broadcast")

    def on_link(self, proc, chunk, ctx):
        self._take_answer(proc, chunk, ctx, "link")


@register("expert")
class Expert(Behavior):
    """Answers queries on its specialty, by broadcast or straight back over a link."""

    def __init__(self, **params):
        super().__init__(**params)
        self.queued: Gist | None = None

    def _matches(self, proc, chunk):
        return "query" in chunk.gist.modality_tags and chunk.gist.payload.startswith(proc.specialty)

    def on_broadcast(self, proc, chunk, ctx):
        if self._matches(proc, chunk):
            self.queued = gist("answer", f"{proc.specialty}: {self.params.get('answer', 'Alice')}")

    def on_link(self, proc, chunk, ctx):
        if self._matches(proc, chunk) and proc.linked_to(chunk.address):
            ctx.send_link(chunk.address, gist("answer", f"{proc.specialty}: {self.params.get('answer', 'Alice')}"))

    def propose(self, proc, ctx):
        if self.queued is not None:
            g_, self.queued = self.queued, None
            return g_, float(self.params.get("weight", 50.0))
        return gist("speech", f"{proc.specialty} idle"), float(self.params.get("idle_weight", 1.0))


@register("valued")
class Valued(Behavior):
    """Scripted submissions with scenario ground-truth values (SEA fixtures).

    ``script`` maps tick -> [payload, base weight, value]; ``values`` maps
    payloads of other processors' chunks to their value.
    """

    def propose(self, proc, ctx):
        entry = self.params.get("script", {}).get(ctx.tick)
        if entry is None:
            return NIL, 0.0
        payload, w, _ = entry
        return gist("speech", payload), float(w)

    def assess(self, proc, chunk):
        if chunk.gist.is_nil:
            return None
        for payload, _, value in self.params.get("script", {}).values():
            if chunk.address == proc.address and chunk.gist.payload == payload:
                return float(value)
        return self.params.get("values", {}).get(chunk.gist.payload)


def apply_feedback(proc: Processor, feedbacks: Iterable[Feedback], collapse: bool = False) -> list[Feedback]:
    """Apply SEA feedback; with ``collapse`` the batch nets out to one update."""
    feedbacks = list(feedbacks)
    if not feedbacks:
        return []
    if not collapse:
        for fb in feedbacks:
            sea_update(proc, fb)
        return feedbacks
    net = sum(1 if fb.verdict is Verdict.EMBOLDEN else -1 for fb in feedbacks)
    if net == 0:
        return []
    fb = next(f for f in reversed(feedbacks) if (f.verdict is Verdict.EMBOLDEN) == (net > 0))
    sea_update(proc, fb)
    return [fb]
