"""Seed-reproducible Conscious Turing Machine simulator."""

from .core import (
    NIL,
    Chunk,
    Choice,
    CompetitionFunctionSpec,
    FKind,
    Gist,
    Rng,
    coin_flip,
    combine_children,
    eval_f,
    gist,
    make_chunk,
)
from .machine import Ctm, CtmConfig, ProcessorSpec, load_config, new_ctm
from .scenarios import SCENARIOS, ScenarioResult, run_scenario
from .uptree import (
    Mode,
    build_uptree,
    exact_win_probabilities,
    latency,
    monte_carlo_win_frequencies,
)

__version__ = "0.1.0"
