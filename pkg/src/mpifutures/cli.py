"""Command-line interface.

Exit codes: 0 all checks hold, 1 a property fails or a trace is rejected,
2 usage or model error, 3 inconclusive because exploration was truncated.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import __version__
from .conformance import SCHEMA_VERSION, FutureAssertion, check_trace
from .dsl import parse_model, parse_term, pretty
from .errors import BoundExceeded, FutureError
from .explorer import (
    FAILS, INCONCLUSIVE, check_deadlock, check_leak, check_termination, explore, initial_config,
    verify_election,
)
from .algebra.terms import close
from .simulator import Seeded, election_program, reported_leaders, run, run_all, write_traces

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
PROPS = ("deadlock", "leak", "termination", "election")


class UsageError(Exception):
    pass


def _values(text):
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--values expects comma-separated integers, got {text!r}") from None


def _distinct(values):
    if values is not None and len(set(values)) != len(values):
        raise UsageError(f"--values must be pairwise distinct, got {','.join(map(str, values))}")


def _load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_model(text)


def _rank_count(model, n, values):
    if n is not None:
        return n
    if values is not None:
        return len(values)
    lo, hi = model.ranks
    if lo == hi:
        return lo
    raise UsageError("--n is required for this model")


def _init_args(model, n, values):
    if model.init is None:
        raise UsageError("model has no init clause")
    if not model.init.params:
        return None
    if values is None:
        raise UsageError(f"init takes {len(model.init.params)} argument(s); pass --values")
    if len(values) != n:
        raise UsageError(f"--values lists {len(values)} value(s) for {n} rank(s)")
    return list(values)


def _emit(report, path):
    text = json.dumps(report, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    return text


def cmd_parse(args):
    model = _load_model(args.file)
    if args.emit == "canonical":
        sys.stdout.write(pretty(model))
    else:
        print(f"{args.file}: ok ({len(model.defs)} process definition(s))")
    return EXIT_OK


def _selected_props(spec, model):
    if spec == "all":
        chosen = ["deadlock", "leak", "termination"]
        if any(t.name == "lead" for t in model.tags):
            chosen.append("election")
        return chosen
    chosen = [p.strip() for p in spec.split(",") if p.strip()]
    for p in chosen:
        if p not in PROPS:
            raise UsageError(f"unknown property {p!r}; choose from {', '.join(PROPS)} or all")
    return chosen


def cmd_explore(args):
    model = _load_model(args.file)
    values = _values(args.values)
    n = _rank_count(model, args.n, values)
    props = _selected_props(args.props, model)
    init_args = _init_args(model, n, values)
    if "election" in props:
        _distinct(values)
    cfg, env = initial_config(model, n, init_args)
    ss = explore(cfg, env, max_states=args.bound, queue_cap=args.queue_cap, workers=args.workers)
    reports = []
    checks = {"deadlock": check_deadlock, "leak": check_leak, "termination": check_termination}
    for p in props:
        if p in checks:
            reports.append(checks[p](ss))
    election = None
    if "election" in props:
        election = verify_election(model, n, values, max_states=args.bound, queue_cap=args.queue_cap,
                                   workers=args.workers)
        reports += [r for r in election.reports if r.name not in checks]
    if args.lts:
        Path(args.lts).write_text(ss.to_aut())
    report = {
        "schema_version": SCHEMA_VERSION,
        "model": str(args.file),
        "n": n,
        "values": list(values) if values is not None else None,
        "states": len(ss.states),
        "transitions": len(ss.transitions),
        "truncated": ss.truncated,
        "truncation": sorted(ss.reasons),
        "properties": [r.to_json() for r in reports],
    }
    if election is not None:
        report["leader"] = election.leader
    _emit(report, args.report)
    print(f"{len(ss.states)} states, {len(ss.transitions)} transitions"
          + (f" (truncated: {', '.join(sorted(ss.reasons))})" if ss.truncated else ""))
    for r in reports:
        line = f"{r.name}: {r.verdict}"
        if r.witness is not None:
            line += f"  witness: [{'; '.join(r.witness)}]"
        print(line)
    verdicts = {r.verdict for r in reports}
    if FAILS in verdicts:
        return EXIT_FAIL
    if INCONCLUSIVE in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_simulate(args):
    if args.program != "election":
        raise UsageError(f"unknown program {args.program!r}")
    values = _values(args.values)
    n = args.n if args.n is not None else (len(values) if values else None)
    if n is None:
        raise UsageError("--n or --values is required")
    if values is None:
        values = tuple(range(1, n + 1))
    if len(values) != n:
        raise UsageError(f"--values lists {len(values)} value(s) for {n} rank(s)")
    _distinct(values)
    program = election_program(values)
    if args.exhaustive:
        try:
            outcomes = run_all(program, n, args.depth, wait=args.wait)
        except BoundExceeded as exc:
            print(f"bound exceeded: {exc}", file=sys.stderr)
            return EXIT_INCONCLUSIVE
        statuses = sorted({o.status for o in outcomes})
        summary = {
            "schema_version": SCHEMA_VERSION,
            "program": "election",
            "n": n,
            "values": list(values),
            "outcomes": len(outcomes),
            "statuses": statuses,
        }
        print(json.dumps(summary, indent=2))
        return EXIT_OK if statuses == ["completed"] else EXIT_FAIL
    result = run(program, n, Seeded(args.seed), max_steps=args.depth, wait=args.wait)
    paths = write_traces(result, args.out)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "program": "election",
        "n": n,
        "values": list(values),
        "seed": args.seed,
        "outcome": result.outcome,
        "steps": result.steps,
        "leaders": reported_leaders(result),
        "traces": [str(p) for p in paths],
    }
    print(json.dumps(summary, indent=2))
    if result.outcome == "bound-exceeded":
        return EXIT_INCONCLUSIVE
    return EXIT_OK if result.outcome == "completed" else EXIT_FAIL


def _trace_rank(path, events):
    if events:
        return events[0].rank
    m = re.search(r"(\d+)", Path(path).stem)
    if not m:
        raise UsageError(f"cannot tell which rank {path} belongs to")
    return int(m.group(1))


def cmd_check(args):
    from .simulator import read_trace

    model = _load_model(args.model)
    traces = []
    for p in args.traces:
        try:
            events = read_trace(p)
        except OSError as exc:
            raise UsageError(f"cannot read trace {p}: {exc.strerror}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"malformed trace {p}: {exc}") from None
        traces.append((p, _trace_rank(p, events), events))
    values = _values(args.values)
    n = args.n if args.n is not None else (len(values) if values is not None else len(traces))
    cfg, env = initial_config(model, n, _init_args(model, n, values))
    futures = dict(enumerate(cfg.locals))
    for item in args.rank_future or ():
        rank, sep, text = item.partition("=")
        if not sep or not rank.strip().isdigit():
            raise UsageError(f"--rank-future expects RANK=TERM, got {item!r}")
        futures[int(rank)] = close(parse_term(text, model), {"i": int(rank), "N": n})
    verdicts = []
    for path, rank, events in traces:
        if rank not in futures:
            raise UsageError(f"trace {path} is for rank {rank}, outside 0..{n - 1}")
        v = check_trace(FutureAssertion(1, futures[rank]), events, env, rank)
        verdicts.append(v)
        line = f"{path}: rank {rank} {v.verdict}"
        if not v.accepted:
            line += f" at index {v.reject_index}: {v.reason}"
        print(line)
    report = {"schema_version": SCHEMA_VERSION, "verdicts": [v.to_json() for v in verdicts]}
    _emit(report, args.report)
    return EXIT_OK if all(v.accepted for v in verdicts) else EXIT_FAIL


def build_parser():
    ap = argparse.ArgumentParser(prog="mpifutures", description="Verify MPI protocol futures.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and sort-check a model")
    p.add_argument("file")
    p.add_argument("--emit", choices=["canonical"], help="print the canonical form")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("explore", help="explore the composed state space and check properties")
    p.add_argument("file")
    p.add_argument("--n", type=int, help="number of ranks")
    p.add_argument("--values", help="comma-separated init argument per rank")
    p.add_argument("--bound", type=int, default=200_000, help="maximum number of states")
    p.add_argument("--queue-cap", type=int, default=4, help="maximum length of any channel queue")
    p.add_argument("--props", default="all", help="all, or a comma list of " + ", ".join(PROPS))
    p.add_argument("--lts", help="write the state space in Aldebaran format")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--workers", type=int, help="threads for frontier expansion")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("simulate", help="run a built-in program on the simulated MPI runtime")
    p.add_argument("--program", default="election")
    p.add_argument("--n", type=int)
    p.add_argument("--values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="traces", help="directory for rank<i>.jsonl trace files")
    p.add_argument("--exhaustive", action="store_true", help="enumerate every schedule")
    p.add_argument("--depth", type=int, default=10_000, help="event bound per schedule")
    p.add_argument("--wait", choices=["delivery", "buffered"], default="delivery")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="check trace files against the model's futures")
    p.add_argument("model")
    p.add_argument("traces", nargs="+")
    p.add_argument("--n", type=int)
    p.add_argument("--values")
    p.add_argument("--rank-future", action="append", metavar="RANK=TERM",
                   help="check RANK against TERM instead of the init clause")
    p.add_argument("--report", help="write the JSON verdict report here")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FutureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
