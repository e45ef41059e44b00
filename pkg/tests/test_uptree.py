import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctm.core import NIL, CompetitionFunctionSpec, FKind, Rng, make_chunk
from ctm.uptree import (
    Mode,
    build_uptree,
    exact_win_probabilities,
    latency,
    level0_from_weights,
    mc_tolerance,
    monte_carlo_win_frequencies,
    padded_size,
)

INTENSITY = CompetitionFunctionSpec.intensity()
ABS_MOOD = CompetitionFunctionSpec(FKind.ABS_MOOD)
ABS_WEIGHT = CompetitionFunctionSpec(FKind.ABS_WEIGHT)
CANCELLING = (100, -100, 1, 2)
LOPSIDED = (10, 10, 10, 10, 10, 0, 0, 0)


def test_build_uptree_shapes():
    t = build_uptree(4, 2)
    assert (t.height, t.leaf_count) == (2, 4)
    t = build_uptree(5, 2)
    assert (t.height, t.leaf_count) == (3, 8)
    assert padded_size(10**7, 10) == (10**7, 7)
    assert padded_size(1, 2) == (2, 1)


def test_exact_oracle_reference_fixtures():
    p = exact_win_probabilities(level0_from_weights([1, 2, 3, 4]), INTENSITY)
    assert np.allclose(p, [0.1, 0.2, 0.3, 0.4], atol=1e-12, rtol=0)
    p = exact_win_probabilities(level0_from_weights(CANCELLING), ABS_MOOD)
    assert p[0] == 0 and p[1] == 0
    assert abs(p[2] - 1 / 3) < 1e-15 and abs(p[3] - 2 / 3) < 1e-15
    p = exact_win_probabilities(level0_from_weights(LOPSIDED), ABS_WEIGHT)
    assert np.allclose(p, [1 / 8] * 4 + [1 / 2, 0, 0, 0], atol=1e-15, rtol=0)


def test_exact_oracle_matches_brute_force_enumeration():
    # enumerate every path of local choices on a 3-ary tree with 9 leaves
    weights = [3, -1, 0, 2, 5, -4, 1, 1, -2]
    chunks = level0_from_weights(weights)
    for f in (INTENSITY, ABS_MOOD, ABS_WEIGHT, CompetitionFunctionSpec(FKind.INTENSITY_PLUS_C_MOOD, 0.5)):
        brute = _enumerate(weights, f, 3)
        oracle = exact_win_probabilities(chunks, f, arity=3)
        assert np.allclose(oracle, [float(x) for x in brute], atol=1e-12, rtol=0)


def _enumerate(weights, f, k):
    """Exact rational win probabilities by enumerating all local outcomes."""
    leaves = [(i, Fraction(w), Fraction(abs(w)), Fraction(w)) for i, w in enumerate(weights)]

    def fv(node):
        _, w, inten, mood = node
        if f.kind is FKind.ABS_MOOD:
            return abs(mood)
        if f.kind is FKind.ABS_WEIGHT:
            return abs(w)
        return max(Fraction(0), inten + Fraction(f.c).limit_denominator() * mood)

    dist = {tuple(leaves): Fraction(1)}
    while len(next(iter(dist))) > 1:
        nxt = {}
        for level, p in dist.items():
            groups = [level[i:i + k] for i in range(0, len(level), k)]
            options = []
            for g in groups:
                vals = [fv(c) for c in g]
                tot = sum(vals)
                inten, mood = sum(c[2] for c in g), sum(c[3] for c in g)
                opts = []
                for c, v in zip(g, vals):
                    q = v / tot if tot else Fraction(1, len(g))
                    if q:
                        opts.append(((c[0], c[1], inten, mood), q))
                options.append(opts)
            for combo in itertools.product(*options):
                key = tuple(c for c, _ in combo)
                q = p
                for _, x in combo:
                    q *= x
                nxt[key] = nxt.get(key, 0) + q
        dist = nxt
    out = [Fraction(0)] * len(weights)
    for level, p in dist.items():
        out[level[0][0]] += p
    return out


@settings(max_examples=60, deadline=None)
@given(
    weights=st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=16),
    c=st.floats(-1, 1, allow_nan=False),
    arity=st.sampled_from([2, 3, 4]),
)
def test_theorem_property_additive_f(weights, c, arity):
    chunks = level0_from_weights(weights)
    f = CompetitionFunctionSpec(FKind.INTENSITY_PLUS_C_MOOD, c)
    p = exact_win_probabilities(chunks, f, arity)
    assert abs(p.sum() - 1) < 1e-9
    fv = np.array([max(0.0, abs(w) + c * w) for w in weights])
    if fv.sum() > 1e-9:
        assert np.allclose(p[: len(weights)], fv / fv.sum(), atol=1e-9, rtol=0)


@settings(max_examples=40, deadline=None)
@given(weights=st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=8), data=st.data())
def test_permutation_invariance_property(weights, data):
    perm = data.draw(st.permutations(range(len(weights))))
    p = exact_win_probabilities(level0_from_weights(weights), INTENSITY)[: len(weights)]
    q = exact_win_probabilities(level0_from_weights([weights[i] for i in perm]), INTENSITY)[: len(weights)]
    assert np.allclose(q, p[list(perm)], atol=1e-12, rtol=0)


def test_monte_carlo_examples():
    rng = Rng(5)
    freq = monte_carlo_win_frequencies(level0_from_weights([1, 2, 3, 4]), INTENSITY, 100_000, rng)
    assert np.all(np.abs(freq - [0.1, 0.2, 0.3, 0.4]) <= 0.01)
    freq = monte_carlo_win_frequencies(level0_from_weights(CANCELLING), ABS_MOOD, 10_000, rng)
    assert freq[0] == 0 and freq[1] == 0
    freq = monte_carlo_win_frequencies(level0_from_weights([7]), INTENSITY, 100, rng)
    assert freq[0] == 1.0


def test_monte_carlo_non_binary_within_4_sigma():
    chunks = level0_from_weights([3, -1, 0, 2, 5, -4, 1, 1, -2])
    for f in (INTENSITY, ABS_MOOD, ABS_WEIGHT):
        oracle = exact_win_probabilities(chunks, f, 3)
        freq = monte_carlo_win_frequencies(chunks, f, 100_000, Rng(9), 3)
        assert np.all(np.abs(freq - oracle) <= mc_tolerance(oracle, 100_000) + 1e-12)


def test_pipeline_timing():
    tree = build_uptree(4, 2)
    rng = Rng(0)
    tree.submit_level0(level0_from_weights([1, 1, 1, 1], tick=0), 0)
    assert tree.occupancy(0) == 4
    assert tree.advance(rng) is None  # tick 0
    tree.submit_level0(level0_from_weights([1, 1, 1, 1], tick=1), 1)
    assert tree.advance(rng) is None  # tick 1
    tree.submit_level0(level0_from_weights([1, 1, 1, 1], tick=2), 2)
    w = tree.advance(rng)  # tick 2
    assert w is not None and w.t == 0 and w.intensity == 4


def test_submit_preconditions():
    tree = build_uptree(4, 2)
    with pytest.raises(ValueError):
        tree.submit_level0(level0_from_weights([1, 1, 1, 1], tick=1), 0)
    tree.submit_level0(level0_from_weights([1, 1, 1, 1]), 0)
    with pytest.raises(ValueError):
        tree.submit_level0(level0_from_weights([1, 1, 1, 1]), 0)
    tree2 = build_uptree(4, 2)
    with pytest.raises(ValueError):
        tree2.submit_level0(level0_from_weights([1, 1, 1]), 0)


def test_cancelling_siblings_root_never_high_intensity_siblings():
    tree = build_uptree(4, 2, ABS_MOOD)
    rng = Rng(3)
    winners = {tree.compete(level0_from_weights(CANCELLING, tick=tree.now), rng).address for _ in range(10_000)}
    assert winners == {2, 3}


def test_single_leaf_tree_submitter_always_wins():
    tree = build_uptree(1, 2)
    rng = Rng(0)
    for _ in range(50):
        assert tree.compete([make_chunk(0, tree.now, NIL, 0.5)], rng).address == 0


def test_deterministic_mode_leftmost_ties_and_permutation_dependence():
    p = exact_win_probabilities(level0_from_weights([2, 2, 1, 1]), INTENSITY, mode=Mode.DETERMINISTIC)
    assert list(p) == [1, 0, 0, 0]
    a = exact_win_probabilities(level0_from_weights([3, 3, 1, 4]), INTENSITY, mode=Mode.DETERMINISTIC)
    b = exact_win_probabilities(level0_from_weights([3, 1, 3, 4]), INTENSITY, mode=Mode.DETERMINISTIC)
    # leaf with weight 4 wins in one order, a weight-3 leaf in the other
    assert a[3] == 0 and a[0] == 1
    assert b[3] == 1


@pytest.mark.parametrize(
    "n, k, h, stm, aware",
    [(2**23, 2, 23, 2.3, 2.4), (10**7, 10, 7, 0.7, 0.8), (1, 2, 0, 0.0, 0.1)],
)
def test_latency(n, k, h, stm, aware):
    rep = latency(100, n, k)
    assert rep.ticks_to_stm == h
    assert rep.seconds_to_stm == stm
    assert rep.seconds_to_awareness == aware


def test_monte_carlo_calibration():
    # standardized deviations of Monte Carlo frequencies from the oracle should look N(0, 1)
    gen = Rng(77).numpy("calibration")
    zs = []
    for i in range(300):
        n = int(gen.choice([2, 4, 8, 16]))
        f = CompetitionFunctionSpec(FKind.INTENSITY_PLUS_C_MOOD, float(gen.uniform(-1, 1)))
        chunks = level0_from_weights(gen.uniform(-10, 10, size=n).tolist())
        p = exact_win_probabilities(chunks, f)
        freq = monte_carlo_win_frequencies(chunks, f, 20_000, Rng(i))
        live = (p > 0) & (p < 1)
        zs.extend((freq[live] - p[live]) / np.sqrt(p[live] * (1 - p[live]) / 20_000))
    zs = np.array(zs)
    assert len(zs) > 1500
    assert abs(zs.mean()) < 0.1
    assert abs(zs.std() - 1) < 0.05
    assert np.mean(np.abs(zs) > 3) < 0.006
