"""Command-line entry point: run scenarios, verify the selection theorem,
print win probabilities and latencies, and replay traces.

Exit codes: 0 success, 1 assertion failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .core import CompetitionFunctionSpec, Rng, fmt_real
from .machine import ConfigError, Ctm, check_aggregation, load_config
from .scenarios import SCENARIOS, run_scenario
from .trace import Trace, TraceError, encode_event, stream_of_consciousness
from .uptree import (
    ORACLE_MAX_LEAVES,
    Mode,
    closed_form_probabilities,
    exact_win_probabilities,
    latency,
    level0_from_weights,
    mc_tolerance,
    monte_carlo_win_frequencies,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _f_spec(name: str, c: float) -> CompetitionFunctionSpec:
    try:
        return CompetitionFunctionSpec.parse(name, c)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_mapping(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)  # JSON is a subset of YAML
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: not valid YAML/JSON ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a mapping at the top level")
    return data


# -- run-scenario --

def cmd_run_scenario(args, out) -> int:
    if args.name not in SCENARIOS:
        print(f"unknown scenario {args.name!r}; available: {', '.join(sorted(SCENARIOS))}", file=sys.stderr)
        return EXIT_USAGE
    overrides = _load_mapping(args.config) if args.config else {}
    try:
        result = run_scenario(args.name, args.seed, overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for label, trace in sorted(result.traces.items()):
        suffix = "" if label == "main" else f".{label}"
        trace.write(outdir / f"{args.name}{suffix}.trace.jsonl")
    report = result.report()
    (outdir / f"{args.name}.report.txt").write_text(report, encoding="utf-8")
    out.write(report)
    return EXIT_OK if result.passed else EXIT_FAIL


# -- simulate --

def cmd_simulate(args, out) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for fld, msg in exc.problems:
            print(f"config error: {fld}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load config: {exc}") from None
    if args.seed is not None:
        cfg.seed = args.seed
    ticks = args.ticks if args.ticks is not None else cfg.lifetime
    if ticks > cfg.lifetime:
        raise UsageError(f"--ticks {ticks} exceeds lifetime {cfg.lifetime}")
    ctm = Ctm(cfg)
    ctm.run(ticks)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ctm.trace.write(outdir / "trace.jsonl")
    problems = check_aggregation(ctm.trace, ctm.h)
    out.write(f"ticks: {ticks}\nheight: {ctm.h}\nbroadcasts: {len(ctm.trace.of_kind('Broadcast'))}\n")
    for p in problems:
        out.write(f"aggregation mismatch: {p}\n")
    return EXIT_FAIL if problems else EXIT_OK


# -- verify-theorem --

def _weights(args) -> list[float]:
    if args.weights:
        try:
            ws = [float(x) for x in args.weights.split(",")]
        except ValueError:
            raise UsageError(f"--weights: expected comma-separated numbers, got {args.weights!r}") from None
        if args.n is not None and args.n != len(ws):
            raise UsageError(f"--n {args.n} does not match {len(ws)} weights")
        return ws
    if args.n is None or args.n < 1:
        raise UsageError("give --n >= 1 or --weights")
    gen = Rng(args.seed).numpy("weights")
    return [float(w) for w in gen.uniform(-10.0, 10.0, size=args.n)]


def cmd_verify_theorem(args, out) -> int:
    f_spec = _f_spec(args.f, args.c)
    ws = _weights(args)
    if len(ws) > ORACLE_MAX_LEAVES:
        raise UsageError(f"exact oracle limited to N <= {ORACLE_MAX_LEAVES}")
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    chunks = level0_from_weights(ws)
    n = len(ws)
    oracle = exact_win_probabilities(chunks, f_spec, args.arity)[:n]
    ok = True
    out.write(f"f: {f_spec.label()}\nN: {n}\narity: {args.arity}\ntrials: {args.trials}\nseed: {args.seed}\n")
    mc = tol = None
    if args.trials > 0:
        mc = monte_carlo_win_frequencies(chunks, f_spec, args.trials, Rng(args.seed).spawn("verify"), args.arity)[:n]
        tol = mc_tolerance(oracle, args.trials)
    closed = closed_form_probabilities(chunks, f_spec, args.arity)[:n] if f_spec.declared_additive else None
    out.write("leaf,weight,oracle" + (",closed_form" if closed is not None else "") + (",monte_carlo,tolerance" if mc is not None else "") + "\n")
    for i in range(n):
        row = [str(i), fmt_real(ws[i]), fmt_real(oracle[i])]
        if closed is not None:
            row.append(fmt_real(closed[i]))
        if mc is not None:
            row += [fmt_real(mc[i]), fmt_real(tol[i])]
        out.write(",".join(row) + "\n")
    if mc is not None:
        dev = np.abs(mc - oracle)
        mc_ok = bool(np.all(dev <= tol + 1e-12))
        out.write(f"max_mc_deviation: {fmt_real(float(dev.max()))}\n")
        out.write(f"monte_carlo_within_4sigma: {'yes' if mc_ok else 'no'}\n")
        ok &= mc_ok
    if closed is not None:
        cf_dev = float(np.max(np.abs(closed - oracle)))
        cf_ok = cf_dev <= 1e-12
        out.write(f"max_closed_form_deviation: {fmt_real(cf_dev)}\n")
        out.write(f"oracle_matches_closed_form: {'yes' if cf_ok else 'no'}\n")
        ok &= cf_ok
    elif args.expect_theorem:
        out.write(f"theorem: not applicable, f = {f_spec.label()} is not additive "
                  "(a node's f-value is not the sum of its children's), so win probability "
                  "need not be proportional to f\n")
        ok = False
    out.write(f"result: {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_FAIL


# -- probabilities --

def cmd_probabilities(args, out) -> int:
    fixture = _load_mapping(args.fixture)
    ws = fixture.get("weights")
    if not isinstance(ws, list) or not ws:
        raise UsageError(f"{args.fixture}: 'weights' must be a non-empty list")
    try:
        ws = [float(w) for w in ws]
    except (TypeError, ValueError):
        raise UsageError(f"{args.fixture}: weights must be numbers") from None
    f_spec = _f_spec(args.f or fixture.get("f", "intensity"), args.c if args.c is not None else float(fixture.get("c", 0.0)))
    arity = args.arity or int(fixture.get("arity", 2))
    mode = Mode(args.mode)
    chunks = level0_from_weights(ws)
    n = len(ws)
    if args.trials:
        vals = monte_carlo_win_frequencies(chunks, f_spec, args.trials, Rng(args.seed).spawn("probabilities"), arity)[:n]
        out.write("address,frequency\n")
    else:
        vals = exact_win_probabilities(chunks, f_spec, arity, mode)[:n]
        out.write("address,probability\n")
    for i, v in enumerate(vals):
        out.write(f"{i},{fmt_real(float(v))}\n")
    return EXIT_OK


# -- latency --

def cmd_latency(args, out) -> int:
    if args.tick_ms <= 0 or args.n < 1 or args.arity < 2:
        raise UsageError("need tick_ms > 0, N >= 1 and arity >= 2")
    rep = latency(args.tick_ms, args.n, args.arity)
    out.write(
        f"h: {rep.ticks_to_stm}\n"
        f"ticks_to_stm: {rep.ticks_to_stm}\n"
        f"ticks_to_awareness: {rep.ticks_to_awareness}\n"
        f"seconds_to_stm: {rep.seconds_to_stm}\n"
        f"seconds_to_awareness: {rep.seconds_to_awareness}\n"
    )
    return EXIT_OK


# -- replay --

def _parse_filters(items: list[str]) -> dict:
    spec: dict = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--filter expects k=v, got {item!r}")
        try:
            if key == "kind":
                spec["kind"] = value
            elif key == "tick":
                lo, _, hi = value.partition(":")
                spec["tick_range"] = (int(lo), int(hi)) if hi else (int(lo), int(lo) + 1)
            elif key == "address":
                spec["address"] = int(value)
            else:
                raise UsageError(f"unknown filter key {key!r} (use kind, tick, address)")
        except ValueError:
            raise UsageError(f"bad filter value in {item!r}") from None
    return spec


def cmd_replay(args, out) -> int:
    filters = _parse_filters(args.filter or [])
    try:
        trace = Trace.read(args.trace)
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc.strerror}") from None
    except TraceError as exc:
        print(f"{args.trace}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.stream:
        for _, text in stream_of_consciousness(trace):
            out.write(text + "\n")
        return EXIT_OK
    for e in trace.filter(**filters):
        out.write(encode_event(e) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctm", description="Seeded Conscious Turing Machine simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-scenario", help="run a named scenario and its controls")
    p.add_argument("name")
    p.add_argument("--config", help="YAML mapping of scenario parameter overrides")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("simulate", help="run a machine described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--ticks", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-theorem", help="exact oracle vs closed form vs Monte Carlo")
    p.add_argument("--n", type=int)
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--f", default="intensity", help="intensity | abs-mood | abs-weight")
    p.add_argument("--c", type=float, default=0.0, help="mood coefficient for f = intensity + c*mood")
    p.add_argument("--weights", help="comma-separated level-0 weights (default: random in [-10, 10])")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--expect-theorem", action="store_true")
    p.set_defaults(func=cmd_verify_theorem)

    p = sub.add_parser("probabilities", help="per-leaf win probabilities as CSV")
    p.add_argument("fixture", help="YAML/JSON file with a 'weights' list")
    p.add_argument("--f")
    p.add_argument("--c", type=float)
    p.add_argument("--arity", type=int)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.PROBABILISTIC.value)
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials instead of the exact oracle")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probabilities)

    p = sub.add_parser("latency", help="ticks and seconds from submission to STM and to awareness")
    p.add_argument("tick_ms", type=float)
    p.add_argument("n", type=int, metavar="N")
    p.add_argument("arity", type=int)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("replay", help="print trace events or the stream of consciousness")
    p.add_argument("trace")
    p.add_argument("--filter", action="append", metavar="K=V", help="kind=..., tick=N or tick=LO:HI, address=N")
    p.add_argument("--stream", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, sys.stdout)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
