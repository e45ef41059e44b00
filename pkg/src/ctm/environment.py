"""Environments: named real-valued signals read by sensors, changed by actuators."""

from __future__ import annotations

from typing import Callable

from .core import Rng, gist
from .processors import Sensation

ENVIRONMENTS: dict[str, type] = {}


def register_environment(kind: str) -> Callable[[type], type]:
    def deco(cls):
        cls.kind = kind
        ENVIRONMENTS[kind] = cls
        return cls

    return deco


def make_environment(kind: str, params: dict | None = None) -> "Environment":
    try:
        cls = ENVIRONMENTS[kind]
    except KeyError:
        raise ValueError(f"unknown environment kind {kind!r}; known: {sorted(ENVIRONMENTS)}") from None
    return cls(**(params or {}))


class Environment:
    """Base environment with no sensors.

    State lives in ``signals``.  The machine calls :meth:`sense` at the start
    of a tick, :meth:`actuate` for each admitted actuator command and
    :meth:`evolve` once afterwards, so the next state depends only on the
    previous state, the commands and the environment's own seeded stream.
    """

    kind = "none"

    def __init__(self, **params):
        self.params = params
        self.signals: dict[str, float] = {}
        self.actuator_log: list[tuple[int, str, str]] = []
        self.rng: Rng | None = None

    def bind(self, rng: Rng) -> None:
        self.rng = rng

    def sense(self, tick: int) -> list[Sensation]:
        return []

    def actuate(self, tick: int, actuator: str, command: str) -> None:
        self.actuator_log.append((tick, actuator, command))

    def evolve(self, tick: int) -> None:
        pass


register_environment("none")(Environment)


@register_environment("schedule")
class ScheduledSignals(Environment):
    """Replays a fixed schedule: ``events`` is a list of
    ``{tick, sensor, payload, weight, modality}`` mappings."""

    def sense(self, tick):
        out = []
        for ev in self.params.get("events", []):
            if int(ev["tick"]) == tick:
                out.append(
                    Sensation(
                        ev["sensor"],
                        tick,
                        tuple(sorted(ev.get("values", {}).items())),
                        gist(ev.get("modality", "vision"), ev.get("payload", "")),
                        float(ev.get("weight", 1.0)),
                    )
                )
        return out
