"""k-ary Up-Tree competition: pipelined selection, exact oracle, Monte Carlo, latency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .core import (
    NIL,
    Chunk,
    CompetitionFunctionSpec,
    FKind,
    Rng,
    categorical_index,
    combine_children,
    eval_f,
    make_chunk,
)

ORACLE_MAX_LEAVES = 4096


class Mode(str, Enum):
    PROBABILISTIC = "probabilistic"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class NodeWin:
    level: int
    node: int
    start_tick: int
    address: int


def padded_size(n: int, arity: int) -> tuple[int, int]:
    """(leaf_count, height) with leaf_count the smallest power of arity >= n, height >= 1."""
    if arity < 2:
        raise ValueError(f"arity must be >= 2, got {arity}")
    if n < 1:
        raise ValueError(f"need at least one processor, got {n}")
    leaves, h = arity, 1
    while leaves < n:
        leaves *= arity
        h += 1
    return leaves, h


def local_winner(fvals: Sequence[float], mode: Mode, rng: Rng | None) -> int:
    """Index of the winning child among siblings with the given f-values."""
    if mode is Mode.DETERMINISTIC:
        best = max(fvals)
        return fvals.index(best)  # leftmost on ties
    return categorical_index(fvals, rng.random())


@dataclass
class UpTree:
    n_processors: int
    arity: int
    height: int
    leaf_count: int
    f_spec: CompetitionFunctionSpec
    mode: Mode = Mode.PROBABILISTIC
    now: int = 0
    # start tick -> (level, chunks held at that level, left to right)
    inflight: dict = field(default_factory=dict)
    last_node_wins: list = field(default_factory=list)

    def null_chunk(self, leaf: int, tick: int) -> Chunk:
        return make_chunk(leaf, tick, NIL, 0.0)

    def occupancy(self, level: int) -> int:
        for lvl, chunks in self.inflight.values():
            if lvl == level:
                return len(chunks)
        return 0

    def submit_level0(self, chunks: Sequence[Chunk] | Mapping[int, Chunk], tick: int) -> None:
        if tick != self.now:
            raise ValueError(f"tree is at tick {self.now}, cannot accept submissions for {tick}")
        if tick in self.inflight:
            raise ValueError(f"level-0 slots for tick {tick} are already occupied")
        by_leaf: dict[int, Chunk] = {}
        items = chunks.values() if isinstance(chunks, Mapping) else chunks
        for c in items:
            if c.t != tick:
                raise ValueError(f"chunk from processor {c.address} has t={c.t}, expected {tick}")
            if not 0 <= c.address < self.n_processors:
                raise ValueError(f"no leaf for address {c.address}")
            if c.address in by_leaf:
                raise ValueError(f"duplicate submission for leaf {c.address}")
            by_leaf[c.address] = c
        missing = [a for a in range(self.n_processors) if a not in by_leaf]
        if missing:
            raise ValueError(f"missing submissions for leaves {missing}")
        level0 = [by_leaf[a] if a < self.n_processors else self.null_chunk(a, tick) for a in range(self.leaf_count)]
        self.inflight[tick] = (0, level0)

    def advance(self, rng: Rng | None = None) -> Chunk | None:
        """Move every competition submitted before ``now`` up one level.

        Nodes are evaluated bottom-up, left to right, so rng draws happen in a
        fixed order.  Returns the root chunk of the competition started at
        ``now - height``, if there is one.
        """
        if self.mode is Mode.PROBABILISTIC and rng is None:
            raise ValueError("probabilistic mode needs an rng")
        self.last_node_wins = []
        winner = None
        for start in sorted(self.inflight, reverse=True):
            if start >= self.now:
                continue
            level, chunks = self.inflight[start]
            parents = []
            for node in range(len(chunks) // self.arity):
                kids = chunks[node * self.arity:(node + 1) * self.arity]
                fvals = [eval_f(self.f_spec, c) for c in kids]
                pick = kids[local_winner(fvals, self.mode, rng)]
                parents.append(combine_children(pick, kids))
                self.last_node_wins.append(NodeWin(level + 1, node, start, pick.address))
            if level + 1 == self.height:
                del self.inflight[start]
                winner = parents[0]
            else:
                self.inflight[start] = (level + 1, parents)
        self.now += 1
        return winner

    def compete(self, chunks: Sequence[Chunk], rng: Rng | None = None) -> Chunk:
        """Run one whole competition on an otherwise empty tree (oracle-free check path)."""
        if self.inflight:
            raise ValueError("compete needs an idle tree")
        start = self.now
        self.submit_level0(chunks, start)
        result = None
        # the submission tick itself lifts nothing; h more advances reach the root
        for _ in range(self.height + 1):
            result = self.advance(rng)
        assert result is not None
        return result


def build_uptree(
    n_processors: int,
    arity: int = 2,
    f_spec: CompetitionFunctionSpec | None = None,
    mode: Mode | str = Mode.PROBABILISTIC,
) -> UpTree:
    leaves, h = padded_size(n_processors, arity)
    return UpTree(
        n_processors=n_processors,
        arity=arity,
        height=h,
        leaf_count=leaves,
        f_spec=f_spec or CompetitionFunctionSpec.intensity(),
        mode=Mode(mode),
    )


def level0_from_weights(weights: Sequence[float], tick: int = 0) -> list[Chunk]:
    return [make_chunk(i, tick, NIL, w) for i, w in enumerate(weights)]


def _padded_leaves(chunks: Sequence[Chunk], arity: int) -> tuple[list[Chunk], int]:
    leaves, h = padded_size(len(chunks), arity)
    t = chunks[0].t if chunks else 0
    out = list(chunks) + [make_chunk(i, t, NIL, 0.0) for i in range(len(chunks), leaves)]
    return out, h


def exact_win_probabilities(
    level0_chunks: Sequence[Chunk],
    f_spec: CompetitionFunctionSpec,
    arity: int = 2,
    mode: Mode | str = Mode.PROBABILISTIC,
) -> np.ndarray:
    """Exact probability that each (padded) leaf wins the root.

    Bottom-up dynamic programme over winner identities.  Intensity and mood at
    a node are subtree sums whatever the winner, so a child's f-value depends
    on the winner only through its weight (relevant for ``abs-weight``).
    """
    mode = Mode(mode)
    leaves, _ = padded_size(len(level0_chunks), arity)
    if leaves > ORACLE_MAX_LEAVES:
        raise ValueError(f"exact oracle limited to {ORACLE_MAX_LEAVES} leaves, got {leaves}")
    chunks, h = _padded_leaves(level0_chunks, arity)
    weights = np.array([c.weight for c in chunks], dtype=float)

    if mode is Mode.DETERMINISTIC:
        tree = UpTree(len(chunks), arity, h, leaves, f_spec, Mode.DETERMINISTIC)
        root = tree.compete(chunks)
        out = np.zeros(leaves)
        out[root.address] = 1.0
        return out

    # per node: (leaf index array, probability array, intensity, mood)
    nodes = [(np.array([i]), np.array([1.0]), c.intensity, c.mood) for i, c in enumerate(chunks)]
    for _ in range(h):
        parents = []
        for p in range(len(nodes) // arity):
            kids = nodes[p * arity:(p + 1) * arity]
            intensity = math.fsum(k[2] for k in kids)
            mood = math.fsum(k[3] for k in kids)
            fdists = [_child_f_distribution(f_spec, weights, k) for k in kids]
            leaf_ids, probs = [], []
            for i, (ids, pr, _, _) in enumerate(kids):
                others = [fdists[j] for j in range(arity) if j != i]
                svals, sprobs = _sum_distribution(others)
                fl = _child_f_values(f_spec, weights, kids[i])
                denom = fl[:, None] + svals[None, :]
                with np.errstate(invalid="ignore", divide="ignore"):
                    ratio = np.where(denom > 0, fl[:, None] / np.where(denom > 0, denom, 1.0), 1.0 / arity)
                win = ratio @ sprobs
                leaf_ids.append(ids)
                probs.append(pr * win)
            parents.append((np.concatenate(leaf_ids), np.concatenate(probs), intensity, mood))
        nodes = parents
    ids, probs, _, _ = nodes[0]
    out = np.zeros(leaves)
    out[ids] = probs
    return out


def _child_f_values(f_spec: CompetitionFunctionSpec, weights: np.ndarray, node) -> np.ndarray:
    ids, _, intensity, mood = node
    if f_spec.kind is FKind.ABS_WEIGHT:
        return np.abs(weights[ids])
    if f_spec.kind is FKind.ABS_MOOD:
        return np.full(len(ids), abs(mood))
    return np.full(len(ids), max(0.0, intensity + f_spec.c * mood))


def _child_f_distribution(f_spec, weights, node) -> tuple[np.ndarray, np.ndarray]:
    vals = _child_f_values(f_spec, weights, node)
    uniq, inv = np.unique(vals, return_inverse=True)
    return uniq, np.bincount(inv, weights=node[1], minlength=len(uniq))


def _sum_distribution(dists) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of the sum of independent discrete variables."""
    vals, probs = np.array([0.0]), np.array([1.0])
    for v, p in dists:
        s = (vals[:, None] + v[None, :]).ravel()
        q = (probs[:, None] * p[None, :]).ravel()
        vals, inv = np.unique(s, return_inverse=True)
        probs = np.bincount(inv, weights=q, minlength=len(vals))
    return vals, probs


def monte_carlo_win_frequencies(
    level0_chunks: Sequence[Chunk],
    f_spec: CompetitionFunctionSpec,
    trials: int,
    rng: Rng | np.random.Generator,
    arity: int = 2,
) -> np.ndarray:
    """Per-leaf win frequency over ``trials`` independent probabilistic competitions.

    Trials are simulated side by side with numpy; each node draws one uniform
    per trial, bottom-up and left to right, exactly as :meth:`UpTree.advance`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = rng.numpy("monte-carlo") if isinstance(rng, Rng) else rng
    chunks, h = _padded_leaves(level0_chunks, arity)
    leaves = len(chunks)
    weights = np.array([c.weight for c in chunks])
    intensity = np.array([c.intensity for c in chunks])
    mood = np.array([c.mood for c in chunks])
    winners = np.broadcast_to(np.arange(leaves), (trials, leaves))
    for _ in range(h):
        n_par = intensity.size // arity
        if f_spec.kind is FKind.ABS_WEIGHT:
            fv = np.abs(weights[winners])
        elif f_spec.kind is FKind.ABS_MOOD:
            fv = np.broadcast_to(np.abs(mood), winners.shape)
        else:
            fv = np.broadcast_to(np.maximum(0.0, intensity + f_spec.c * mood), winners.shape)
        fv = fv.reshape(trials, n_par, arity)
        cum = np.cumsum(fv, axis=2)
        total = cum[:, :, -1]
        u = gen.random((trials, n_par))
        target = u * total
        pick = np.argmax(target[:, :, None] < cum, axis=2)
        zero = total <= 0.0
        if zero.any():
            uniform = np.minimum((u * arity).astype(int), arity - 1)
            pick = np.where(zero, uniform, pick)
        wins = winners.reshape(trials, n_par, arity)
        winners = np.take_along_axis(wins, pick[:, :, None], axis=2)[:, :, 0]
        intensity = intensity.reshape(n_par, arity).sum(axis=1)
        mood = mood.reshape(n_par, arity).sum(axis=1)
    counts = np.bincount(winners[:, 0], minlength=leaves)
    return counts / trials


def closed_form_probabilities(level0_chunks: Sequence[Chunk], f_spec: CompetitionFunctionSpec, arity: int = 2) -> np.ndarray:
    """f / sum(f) per padded leaf (uniform when every f-value is zero)."""
    chunks, _ = _padded_leaves(level0_chunks, arity)
    f = np.array([eval_f(f_spec, c) for c in chunks])
    total = math.fsum(f)
    if total <= 0:
        return np.full(len(chunks), 1.0 / len(chunks))
    return f / total


def mc_tolerance(p: np.ndarray, trials: int, sigmas: float = 4.0) -> np.ndarray:
    return sigmas * np.sqrt(p * (1.0 - p) / trials)


@dataclass(frozen=True)
class LatencyReport:
    tick_ms: float
    n_processors: int
    arity: int
    ticks_to_stm: int
    ticks_to_awareness: int

    @property
    def seconds_to_stm(self) -> float:
        return float(Fraction(self.ticks_to_stm) * Fraction(str(self.tick_ms)) / 1000)

    @property
    def seconds_to_awareness(self) -> float:
        return float(Fraction(self.ticks_to_awareness) * Fraction(str(self.tick_ms)) / 1000)


def tree_height(n: int, arity: int) -> int:
    """ceil(log_arity n) in exact integer arithmetic; 0 for a single processor."""
    h, cap = 0, 1
    while cap < n:
        cap *= arity
        h += 1
    return h


def latency(tick_ms: float, n_processors: int, arity: int = 2) -> LatencyReport:
    if tick_ms <= 0 or n_processors < 1:
        raise ValueError("tick_ms and n_processors must be positive")
    if arity < 2:
        raise ValueError("arity must be >= 2")
    h = tree_height(n_processors, arity)
    return LatencyReport(tick_ms, n_processors, arity, h, h + 1)
