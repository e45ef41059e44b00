"""Line-delimited event trace with a canonical field order.

Each line is a JSON object.  The first line is a header carrying
``schema_version``; every other line starts with ``tick``, ``phase`` and
``kind`` followed by the event payload in insertion order.  Reals are written
with nine fractional digits so identical runs give identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .core import Chunk, fmt_real

TRACE_SCHEMA_VERSION = 1

EVENT_KINDS = (
    "Submission",
    "NodeWin",
    "StmInstall",
    "Broadcast",
    "LinkSend",
    "InputDelivery",
    "ActuatorCommand",
    "FeedbackApplied",
    "LinkFormed",
)

# phase numbers within a tick
PHASE_INPUT = 1
PHASE_DELIVER = 2
PHASE_STEP = 3
PHASE_TREE = 4
PHASE_STM = 5
PHASE_OUTPUT = 6
PHASE_FEEDBACK = 7


class TraceError(ValueError):
    pass


def _encode_value(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return fmt_real(v)
    if isinstance(v, int):
        return str(v)
    return json.dumps(v, ensure_ascii=False)


def encode_event(event: dict) -> str:
    return "{" + ",".join(f"{json.dumps(k)}:{_encode_value(v)}" for k, v in event.items()) + "}"


def chunk_fields(chunk: Chunk) -> dict:
    return {
        "address": chunk.address,
        "t": chunk.t,
        "weight": float(chunk.weight),
        "intensity": float(chunk.intensity),
        "mood": float(chunk.mood),
        "gist": chunk.gist.to_text(),
    }


@dataclass
class Trace:
    events: list = field(default_factory=list)
    header: dict = field(default_factory=dict)

    def emit(self, tick: int, phase: int, kind: str, **payload) -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind}")
        self.events.append({"tick": tick, "phase": phase, "kind": kind, **payload})

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[dict]:
        return iter(self.events)

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]

    def filter(
        self,
        kind: str | None = None,
        tick_range: tuple[int, int] | None = None,
        address: int | None = None,
    ) -> list[dict]:
        out = []
        for e in self.events:
            if kind is not None and e["kind"] != kind:
                continue
            if tick_range is not None and not tick_range[0] <= e["tick"] < tick_range[1]:
                continue
            if address is not None and address not in _addresses(e):
                continue
            out.append(e)
        return out

    def to_text(self) -> str:
        head = {"schema_version": TRACE_SCHEMA_VERSION, "kind": "header", **self.header}
        lines = [encode_event(head)] + [encode_event(e) for e in self.events]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8")
        return path

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "Trace":
        trace = cls()
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(f"line {lineno}: not a trace record ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise TraceError(f"line {lineno}: expected an object")
            if rec.get("kind") == "header":
                version = rec.get("schema_version")
                if version != TRACE_SCHEMA_VERSION:
                    raise TraceError(f"line {lineno}: unsupported schema_version {version!r}")
                trace.header = {k: v for k, v in rec.items() if k not in ("kind", "schema_version")}
                continue
            missing = [k for k in ("tick", "phase", "kind") if k not in rec]
            if missing:
                raise TraceError(f"line {lineno}: missing fields {missing}")
            if rec["kind"] not in EVENT_KINDS:
                raise TraceError(f"line {lineno}: unknown event kind {rec['kind']!r}")
            trace.events.append(rec)
        return trace

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh)


def _addresses(event: dict) -> set:
    return {event[k] for k in ("address", "sender", "receiver", "source", "a", "b") if k in event}


def stream_of_consciousness(trace: Trace) -> list[tuple[int, str]]:
    """(delivery tick, gist text) for every broadcast, in order."""
    return [(e["tick"], e["gist"]) for e in trace.events if e["kind"] == "Broadcast"]
