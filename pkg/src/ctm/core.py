"""Chunk algebra, gists, competition functions and the coin-flip neuron.

Every other module is built from the values defined here.  Chunks and gists
are immutable; the only mutable object is :class:`Rng`, which is owned by a
single simulation at a time.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

MODALITIES = frozenset({"speech", "vision", "tactile", "query", "answer", "command", "nil"})
SALIENCE_FLAGS = frozenset({"surprising", "terrible", "wonderful"})

GIST_MAX_BYTES = 128
WEIGHT_MAX = 1e9
REAL_DIGITS = 9


def fmt_real(x: float) -> str:
    """Canonical decimal form used in traces and reports."""
    s = f"{x:.{REAL_DIGITS}f}"
    if s.startswith("-") and float(s) == 0.0:
        s = s[1:]
    return s


@dataclass(frozen=True)
class Gist:
    """Bounded symbolic payload of a chunk."""

    modality_tags: frozenset = frozenset({"nil"})
    payload: str = ""
    salience_flags: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "modality_tags", frozenset(self.modality_tags))
        object.__setattr__(self, "salience_flags", frozenset(self.salience_flags))
        if not self.modality_tags:
            raise ValueError("gist needs at least one modality tag")
        bad = self.modality_tags - MODALITIES
        if bad:
            raise ValueError(f"unknown modality tags: {sorted(bad)}")
        bad = self.salience_flags - SALIENCE_FLAGS
        if bad:
            raise ValueError(f"unknown salience flags: {sorted(bad)}")
        if "nil" in self.modality_tags and (len(self.modality_tags) > 1 or self.payload):
            raise ValueError("the nil tag is reserved for the empty gist")
        if "\n" in self.payload:
            raise ValueError("gist payload must be a single line")
        size = len(self.to_text().encode("utf-8"))
        if size > GIST_MAX_BYTES:
            raise ValueError(f"gist serializes to {size} bytes (limit {GIST_MAX_BYTES})")

    @property
    def is_nil(self) -> bool:
        return "nil" in self.modality_tags

    def to_text(self) -> str:
        tags = ",".join(sorted(self.modality_tags))
        flags = ",".join(sorted(self.salience_flags))
        return f"{tags}|{flags}|{self.payload}"

    @classmethod
    def from_text(cls, text: str) -> "Gist":
        try:
            tags, flags, payload = text.split("|", 2)
        except ValueError:
            raise ValueError(f"malformed gist text: {text!r}") from None
        return cls(
            frozenset(t for t in tags.split(",") if t),
            payload,
            frozenset(f for f in flags.split(",") if f),
        )

    def ref_tick(self) -> int | None:
        """Tick referenced by a ``ref=<tick>`` token in the payload, if any."""
        for token in self.payload.split():
            if token.startswith("ref="):
                try:
                    return int(token[4:])
                except ValueError:
                    return None
        return None


NIL = Gist()


def gist(modality: str | Sequence[str], payload: str = "", *flags: str) -> Gist:
    tags = {modality} if isinstance(modality, str) else set(modality)
    return Gist(frozenset(tags), payload, frozenset(flags))


@dataclass(frozen=True)
class Chunk:
    """The 6-tuple <address, t, gist, weight, intensity, mood>."""

    address: int
    t: int
    gist: Gist
    weight: float
    intensity: float
    mood: float

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")

    def to_record(self) -> dict:
        """Flat canonical record (trace payload form)."""
        return {
            "address": self.address,
            "t": self.t,
            "gist": self.gist.to_text(),
            "weight": self.weight,
            "intensity": self.intensity,
            "mood": self.mood,
        }

    def canonical_text(self) -> str:
        return " ".join(
            [
                f"address={self.address}",
                f"t={self.t}",
                f"weight={fmt_real(self.weight)}",
                f"intensity={fmt_real(self.intensity)}",
                f"mood={fmt_real(self.mood)}",
                f"gist={self.gist.to_text()}",
            ]
        )

    def to_bytes(self) -> bytes:
        # repr-exact floats so that from_bytes(to_bytes(c)) == c
        return json.dumps(self.to_record(), separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Chunk":
        rec = json.loads(data.decode("utf-8"))
        return cls.from_record(rec)

    @classmethod
    def from_record(cls, rec: dict) -> "Chunk":
        return cls(
            address=int(rec["address"]),
            t=int(rec["t"]),
            gist=Gist.from_text(rec["gist"]),
            weight=float(rec["weight"]),
            intensity=float(rec["intensity"]),
            mood=float(rec["mood"]),
        )


def make_chunk(address: int, t: int, gist: Gist, weight: float, n_processors: int | None = None) -> Chunk:
    """Level-0 chunk: intensity = |weight|, mood = weight.

    Weight magnitude is clamped to ``WEIGHT_MAX``.
    """
    if not math.isfinite(weight):
        raise ValueError(f"weight must be finite, got {weight!r}")
    if address < 0 or (n_processors is not None and address >= n_processors):
        raise ValueError(f"address {address} out of range")
    if t < 0:
        raise ValueError("submission tick must be non-negative")
    weight = max(-WEIGHT_MAX, min(WEIGHT_MAX, float(weight)))
    weight += 0.0  # normalise -0.0
    return Chunk(address, t, gist, weight, abs(weight), weight)


class FKind(str, Enum):
    INTENSITY_PLUS_C_MOOD = "intensity+c*mood"
    ABS_MOOD = "abs-mood"
    ABS_WEIGHT = "abs-weight"


@dataclass(frozen=True)
class CompetitionFunctionSpec:
    kind: FKind = FKind.INTENSITY_PLUS_C_MOOD
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FKind(self.kind))
        if self.kind is FKind.INTENSITY_PLUS_C_MOOD:
            if not -1.0 <= self.c <= 1.0:
                raise ValueError(f"c must lie in [-1, 1], got {self.c}")
        elif self.c != 0.0:
            raise ValueError("c only applies to intensity+c*mood")

    @property
    def declared_additive(self) -> bool:
        return self.kind is FKind.INTENSITY_PLUS_C_MOOD

    @classmethod
    def intensity(cls) -> "CompetitionFunctionSpec":
        return cls(FKind.INTENSITY_PLUS_C_MOOD, 0.0)

    @classmethod
    def parse(cls, text: str, c: float = 0.0) -> "CompetitionFunctionSpec":
        """Parse ``intensity``, ``intensity+c*mood``, ``abs-mood`` or ``abs-weight``."""
        key = text.strip().lower().replace("|", "").replace("_", "-")
        if key == "intensity":
            return cls(FKind.INTENSITY_PLUS_C_MOOD, c)
        if key in ("intensity+c*mood", "intensity+cmood"):
            return cls(FKind.INTENSITY_PLUS_C_MOOD, c)
        if key in ("abs-mood", "absmood", "mood"):
            return cls(FKind.ABS_MOOD)
        if key in ("abs-weight", "absweight", "weight"):
            return cls(FKind.ABS_WEIGHT)
        raise ValueError(f"unknown competition function {text!r}")

    def label(self) -> str:
        if self.kind is FKind.INTENSITY_PLUS_C_MOOD:
            return "intensity" if self.c == 0 else f"intensity+{self.c:g}*mood"
        return self.kind.value


def eval_f(spec: CompetitionFunctionSpec, chunk: Chunk) -> float:
    if spec.kind is FKind.INTENSITY_PLUS_C_MOOD:
        # |mood| <= intensity and |c| <= 1, so only rounding can dip below zero
        return max(0.0, chunk.intensity + spec.c * chunk.mood)
    if spec.kind is FKind.ABS_MOOD:
        return abs(chunk.mood)
    return abs(chunk.weight)


class Rng:
    """Seeded random stream; one per simulation component.

    Draws go through :meth:`random` so the number of draws consumed is
    countable.  Child streams are derived by hashing the parent seed with a
    key, never from the parent's state, so adding a consumer does not shift
    anyone else's draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._random = random.Random(self.seed)
        self.draws = 0

    def random(self) -> float:
        self.draws += 1
        return self._random.random()

    def spawn(self, key: str | int) -> "Rng":
        return Rng(derive_seed(self.seed, key))

    def numpy(self, key: str | int = "numpy"):
        import numpy as np

        return np.random.default_rng(derive_seed(self.seed, key))


def derive_seed(seed: int, key: str | int) -> int:
    digest = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class Choice(Enum):
    FIRST = 0
    SECOND = 1


def coin_flip(a: float, b: float, rng: Rng) -> Choice:
    """First with probability a/(a+b); 1/2 when a = b = 0. Always one draw."""
    if a < 0 or b < 0 or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"coin_flip needs finite non-negative inputs, got ({a}, {b})")
    return Choice.FIRST if categorical_index([a, b], rng.random()) == 0 else Choice.SECOND


def categorical_index(values: Sequence[float], u: float) -> int:
    """Index chosen with probability values[i]/sum(values) given u in [0, 1).

    All-zero input picks uniformly.
    """
    k = len(values)
    total = math.fsum(values)
    if total <= 0.0:
        return min(int(u * k), k - 1)
    target = u * total
    acc = 0.0
    last_positive = 0
    for i, v in enumerate(values):
        if v <= 0.0:
            continue
        acc += v
        last_positive = i
        if target < acc:
            return i
    return last_positive


def combine_children(winner: Chunk, children: Sequence[Chunk]) -> Chunk:
    """Chunk installed in a parent node: the winner's identity with summed fields."""
    if not children:
        raise ValueError("combine_children needs at least one child")
    if winner not in children:
        raise ValueError("winner must be one of the children")
    ticks = {c.t for c in children}
    if len(ticks) != 1:
        raise ValueError(f"children carry different submission ticks: {sorted(ticks)}")
    return Chunk(
        winner.address,
        winner.t,
        winner.gist,
        winner.weight,
        math.fsum(c.intensity for c in children),
        math.fsum(c.mood for c in children),
    )

