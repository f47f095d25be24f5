"""Explicit-state exploration of N futures composed with the network builtins.

The global system is ``F_0 || ... || F_{N-1} || Network(T0) || Bcast() ||
Barrier()``. :func:`explore` builds its labelled transition system by
breadth-first search; the ``check_*`` functions decide properties on the
result.

Two bounds keep exploration finite: ``max_states`` and ``queue_cap`` (the
longest any single channel queue may grow). Hitting either marks the state
space truncated. A check on a truncated space still reports ``fails`` when
it finds a witness made only of fully expanded states, since such a witness
is real; otherwise it reports ``inconclusive-truncated``.
"""

from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .algebra.compose import composed_steps
from .algebra.env import Environment, MultiActionLabel
from .algebra.node import node
from .algebra.terms import close, format_term
from .algebra.steps import terminates
from .algebra.values import Msg, format_value, same_value
from .errors import DuplicateValues, RankCountOutOfRange, SortError
from .network import BARRIER_EMPTY, BCAST_IDLE, BarrierState, BcastState, ChannelTable, empty_table

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive-truncated"


@node
class Configuration:
    """A global state: one local future per rank plus the builtin states."""

    locals: tuple
    channels: ChannelTable
    bcast: BcastState = BCAST_IDLE
    barrier: BarrierState = BARRIER_EMPTY

    @property
    def n(self) -> int:
        return len(self.locals)

    @property
    def held(self) -> frozenset:
        return self.barrier.arrived

    def describe(self) -> str:
        parts = [format_term(t) for t in self.locals]
        return f"[{', '.join(parts)}] {self.channels} {self.bcast} {self.barrier}"


def initial_config(model, n: int, init_args: Optional[Sequence] = None):
    """Initial configuration of ``model`` with ``n`` ranks.

    ``init_args[i]`` supplies rank ``i``'s arguments for the init clause, as
    a tuple or, for a single parameter, a bare value. Returns
    ``(Configuration, Environment)``.
    """
    lo, hi = model.ranks
    if not lo <= n <= hi:
        raise RankCountOutOfRange(f"model allows {lo}..{hi} ranks, got {n}")
    if model.init is None:
        raise SortError("model has no init clause")
    env = model.environment(n)
    params = model.init.params
    if params and init_args is None:
        raise SortError(f"init expects {len(params)} argument(s) per rank")
    if init_args is not None and len(init_args) != n:
        raise SortError(f"expected init arguments for {n} ranks, got {len(init_args)}")
    locals_ = []
    for i in range(n):
        args = () if not params else init_args[i]
        if not isinstance(args, (tuple, list)):
            args = (args,)
        if len(args) != len(params):
            raise SortError(f"init expects {len(params)} argument(s), rank {i} got {len(args)}")
        bindings = {"i": i, "N": n}
        for (name, sort), value in zip(params, args):
            if not env.in_domain(sort, value):
                raise SortError(f"init argument {name}={format_value(value)} is outside sort {sort}")
            bindings[name] = value
        locals_.append(close(model.init.term, bindings))
    return Configuration(tuple(locals_), empty_table(n)), env


@dataclass
class StateSpace:
    env: Environment
    states: list
    transitions: list  # (src, MultiActionLabel, dst, Step)
    initial: int = 0
    truncated: bool = False
    reasons: set = field(default_factory=set)
    partial: set = field(default_factory=set)  # states with at least one dropped successor
    unexpanded: set = field(default_factory=set)

    def __post_init__(self):
        self._succ = None
        self._parent = None

    @property
    def succ(self) -> list:
        if self._succ is None:
            self._succ = [[] for _ in self.states]
            for k, (src, _label, _dst, _step) in enumerate(self.transitions):
                self._succ[src].append(k)
        return self._succ

    def complete(self, s: int) -> bool:
        """Whether all successors of state ``s`` are present."""
        return s not in self.partial and s not in self.unexpanded

    def is_terminal(self, s: int) -> bool:
        cfg = self.states[s]
        return (
            all(terminates(t, self.env) for t in cfg.locals)
            and cfg.channels.is_empty()
            and cfg.bcast.idle
            and not cfg.barrier.arrived
        )

    def path_to(self, s: int) -> list:
        """Transition indices of a shortest path from the initial state to ``s``."""
        if self._parent is None:
            parent = {self.initial: None}
            todo = deque([self.initial])
            while todo:
                u = todo.popleft()
                for k in self.succ[u]:
                    v = self.transitions[k][2]
                    if v not in parent:
                        parent[v] = k
                        todo.append(v)
            self._parent = parent
        out = []
        while self._parent.get(s) is not None:
            k = self._parent[s]
            out.append(k)
            s = self.transitions[k][0]
        return out[::-1]

    def labels(self, path) -> list:
        return [str(self.transitions[k][1]) for k in path]

    def to_aut(self) -> str:
        """Aldebaran text: ``des (initial, #transitions, #states)`` then one line per transition."""
        lines = [f"des ({self.initial}, {len(self.transitions)}, {len(self.states)})"]
        lines += [f'({a}, "{label}", {b})' for a, label, b, _ in self.transitions]
        return "\n".join(lines) + "\n"


def _worker_count(workers):
    cap = os.environ.get("FUTURE_VERIFY_THREADS")
    if workers is None:
        workers = 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def explore(cfg: Configuration, env: Environment, max_states: int = 200_000,
            queue_cap: Optional[int] = 4, workers: Optional[int] = None) -> StateSpace:
    """Breadth-first closure of ``cfg`` under the composed step relation.

    State numbering is deterministic: BFS order, successors ordered by label
    text. ``workers > 1`` computes the successors of each BFS level on a
    thread pool (capped by ``FUTURE_VERIFY_THREADS``); insertion stays
    sequential so numbering does not depend on the worker count.
    """
    if max_states < 1:
        raise ValueError("max_states must be at least 1")
    index = {cfg: 0}
    ss = StateSpace(env, [cfg], [])

    def successors(c):
        steps = composed_steps(c.locals, (c.channels, c.bcast, c.barrier), env)
        steps.sort(key=lambda st: str(st.label))
        return steps

    nworkers = _worker_count(workers)
    pool = ThreadPoolExecutor(nworkers) if nworkers > 1 else None
    try:
        level = [0]
        while level:
            configs = [ss.states[s] for s in level]
            results = list(pool.map(successors, configs)) if pool else [successors(c) for c in configs]
            nxt = []
            for src, steps in zip(level, results):
                for st in steps:
                    if queue_cap is not None and st.network.longest() > queue_cap:
                        ss.partial.add(src)
                        ss.reasons.add("queue_cap")
                        continue
                    succ = Configuration(st.locals, st.network, st.bcast, st.barrier)
                    dst = index.get(succ)
                    if dst is None:
                        if len(ss.states) >= max_states:
                            ss.partial.add(src)
                            ss.reasons.add("max_states")
                            continue
                        dst = len(ss.states)
                        index[succ] = dst
                        ss.states.append(succ)
                        nxt.append(dst)
                    ss.transitions.append((src, st.label, dst, st))
            level = nxt
    finally:
        if pool:
            pool.shutdown()
    ss.truncated = bool(ss.reasons)
    return ss


@dataclass
class PropertyReport:
    name: str
    verdict: str
    witness: Optional[list] = None  # label strings from the initial state
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_json(self) -> dict:
        out = {"property": self.name, "verdict": self.verdict}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


def _undecided(ss, name, detail=""):
    if ss.truncated:
        return PropertyReport(name, INCONCLUSIVE, detail=detail or f"state space truncated ({', '.join(sorted(ss.reasons))})")
    return PropertyReport(name, HOLDS, detail=detail)


def _dead_states(ss):
    for s in range(len(ss.states)):
        if not ss.succ[s] and ss.complete(s):
            yield s


def check_deadlock(ss: StateSpace) -> PropertyReport:
    """Fails iff some fully expanded state has no successors and is not terminal."""
    for s in _dead_states(ss):
        if not ss.is_terminal(s):
            return PropertyReport("deadlock", FAILS, ss.labels(ss.path_to(s)),
                                  f"stuck in {ss.states[s].describe()}")
    return _undecided(ss, "deadlock")


def check_leak(ss: StateSpace) -> PropertyReport:
    """Fails iff every future has finished while a message or broadcast is still pending."""
    for s, cfg in enumerate(ss.states):
        if all(terminates(t, ss.env) for t in cfg.locals) and not (cfg.channels.is_empty() and cfg.bcast.idle):
            return PropertyReport("leak", FAILS, ss.labels(ss.path_to(s)),
                                  f"left over: {cfg.channels} {cfg.bcast}")
    return _undecided(ss, "leak")


def _find_cycle(ss, allowed=None):
    """A reachable cycle as ``(stem, loop)`` transition index lists, or None.

    ``allowed(k)`` restricts the transitions that may be used.
    """
    succ = ss.succ
    colour = {}
    for root in (ss.initial,):
        stack = [(root, iter(succ[root]))]
        trail = []  # transition indices along the DFS stack
        colour[root] = 1
        while stack:
            u, it = stack[-1]
            for k in it:
                if allowed is not None and not allowed(k):
                    continue
                v = ss.transitions[k][2]
                c = colour.get(v, 0)
                if c == 1:
                    pos = next(p for p, (w, _) in enumerate(stack) if w == v)
                    return trail[:pos], trail[pos:] + [k]
                if c == 0:
                    colour[v] = 1
                    stack.append((v, iter(succ[v])))
                    trail.append(k)
                    break
            else:
                colour[u] = 2
                stack.pop()
                if trail:
                    trail.pop()
    return None


def check_termination(ss: StateSpace) -> PropertyReport:
    """Holds iff the LTS is acyclic and every maximal path ends in a terminal state."""
    cycle = _find_cycle(ss)
    if cycle is not None:
        stem, loop = cycle
        return PropertyReport("termination", FAILS, ss.labels(stem + loop),
                              f"cycle of length {len(loop)} after {len(stem)} step(s)")
    for s in _dead_states(ss):
        if not ss.is_terminal(s):
            return PropertyReport("termination", FAILS, ss.labels(ss.path_to(s)),
                                  "maximal path ends in a non-terminal state")
    return _undecided(ss, "termination")


def check_eventually(ss: StateSpace, pred: Callable[[MultiActionLabel], bool],
                     name: str = "eventually") -> PropertyReport:
    """Holds iff every maximal path contains a label satisfying ``pred``.

    No fairness is assumed: a reachable cycle avoiding ``pred`` is a
    counterexample.
    """
    ok = [not pred(t[1]) for t in ss.transitions]
    seen = {ss.initial: None}
    todo = deque([ss.initial])
    while todo:
        u = todo.popleft()
        if not ss.succ[u] and ss.complete(u):
            return PropertyReport(name, FAILS, ss.labels(_parent_path(ss, seen, u)),
                                  "maximal path without a matching label")
        for k in ss.succ[u]:
            v = ss.transitions[k][2]
            if ok[k] and v not in seen:
                seen[v] = k
                todo.append(v)
    cycle = _find_cycle(ss, allowed=lambda k: ok[k])
    if cycle is not None:
        stem, loop = cycle
        return PropertyReport(name, FAILS, ss.labels(stem + loop), "cycle without a matching label")
    if ss.truncated and any(not ss.complete(s) for s in seen):
        return PropertyReport(name, INCONCLUSIVE, detail="unexplored states reachable without a matching label")
    return PropertyReport(name, HOLDS)


def _parent_path(ss, parent, s):
    out = []
    while parent.get(s) is not None:
        out.append(parent[s])
        s = ss.transitions[parent[s]][0]
    return out[::-1]


def label_matches(label: MultiActionLabel, name: str, *args) -> bool:
    """Whether some part of ``label`` is action ``name`` with trailing ``args``.

    ``label_matches(l, "bcast", Msg("lead", (0,)))`` matches ``bcast(i, lead<0>)``
    for any ``i``.
    """
    for part in label.parts:
        if part.name == name and len(part.args) >= len(args):
            tail = part.args[len(part.args) - len(args):] if args else ()
            if all(same_value(a, b) for a, b in zip(tail, args)):
                return True
    return False


# ---------------------------------------------------------------- observables

OBSERVED = ("send", "recv", "isend", "bcast", "barrier")


def observable(rank_action) -> tuple:
    """Per-rank event ``(op, peer, data)`` for a rank-side action, rank argument dropped."""
    a = rank_action
    if a.name in ("send", "recv"):
        return (a.name, a.args[1], a.args[2])
    if a.name == "isend":
        return ("isend", a.args[1], a.args[2])
    if a.name == "bcast":
        return ("bcast", None, a.args[1])
    if a.name == "barrier":
        return ("barrier", None, None)
    return (a.name, None, tuple(a.args))


def observable_outcomes(ss: StateSpace) -> set:
    """Distinct ``(status, per-rank event sequences)`` over all maximal paths.

    ``status`` is ``completed`` for paths ending in a terminal state and
    ``deadlocked`` otherwise. Requires a finite acyclic space.
    """
    if ss.truncated or _find_cycle(ss) is not None:
        raise ValueError("observable outcomes need a complete acyclic state space")
    n = ss.states[0].n
    memo = {}
    order = _topological(ss)
    for s in reversed(order):
        if not ss.succ[s]:
            status = "completed" if ss.is_terminal(s) else "deadlocked"
            memo[s] = {(status, ((),) * n)}
            continue
        acc = set()
        for k in ss.succ[s]:
            _, _, dst, step = ss.transitions[k]
            for status, seqs in memo[dst]:
                seqs = list(seqs)
                for r, a in reversed(step.rank_actions):
                    if a.name in OBSERVED:
                        seqs[r] = (observable(a),) + seqs[r]
                acc.add((status, tuple(seqs)))
        memo[s] = acc
    return memo[ss.initial]


def _topological(ss):
    indeg = [0] * len(ss.states)
    for _, _, dst, _ in ss.transitions:
        indeg[dst] += 1
    todo = deque(s for s in range(len(ss.states)) if indeg[s] == 0)
    order = []
    while todo:
        u = todo.popleft()
        order.append(u)
        for k in ss.succ[u]:
            v = ss.transitions[k][2]
            indeg[v] -= 1
            if indeg[v] == 0:
                todo.append(v)
    return order


# ---------------------------------------------------------------- election

@dataclass
class ElectionReport:
    n: int
    values: tuple
    leader: int
    states: int
    transitions: int
    reports: list

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.reports)

    def report(self, name) -> PropertyReport:
        return next(r for r in self.reports if r.name == name)

    def to_json(self) -> dict:
        return {
            "n": self.n, "values": list(self.values), "leader": self.leader,
            "states": self.states, "transitions": self.transitions,
            "properties": [r.to_json() for r in self.reports],
        }


def verify_election(model, n: int, values: Sequence[int], max_states: int = 2_000_000,
                    queue_cap: Optional[int] = None, workers: Optional[int] = None) -> ElectionReport:
    """Explore the election model and check the leader-election claims.

    Besides deadlock, leak and termination, every maximal path must contain
    exactly one broadcast request, carrying ``lead<argmax(values)>``; each
    other rank must receive that announcement exactly once; and ``n``
    barrier arrivals must occur.
    """
    values = tuple(values)
    if len(set(values)) != len(values):
        raise DuplicateValues(f"election values must be distinct, got {values}")
    if len(values) != n:
        raise SortError(f"expected {n} values, got {len(values)}")
    leader = max(range(n), key=lambda r: values[r])
    cfg, env = initial_config(model, n, values)
    ss = explore(cfg, env, max_states=max_states, queue_cap=queue_cap, workers=workers)
    reports = [check_deadlock(ss), check_leak(ss), check_termination(ss)]
    announcement = Msg("lead", (leader,))

    counters = {
        "single-broadcast": (lambda st: sum(1 for _, a in st.rank_actions if a.name == "bcast"), 1),
        "broadcast-carries-leader": (
            lambda st: sum(1 for _, a in st.rank_actions
                           if a.name == "bcast" and same_value(a.args[1], announcement)), 1),
        "barrier-arrivals": (lambda st: 1 if st.label.name == "barrier|barrier-ack" else 0, n),
    }
    for r in range(n):
        if r != leader:
            counters[f"rank-{r}-receives-leader"] = (
                lambda st, r=r: sum(1 for q, a in st.rank_actions
                                    if q == r and a.name == "recv" and same_value(a.args[2], announcement)), 1)
    if ss.truncated or reports[2].verdict != HOLDS:
        for name in counters:
            reports.append(PropertyReport(name, reports[2].verdict if not ss.truncated else INCONCLUSIVE,
                                          detail="needs a complete, terminating state space"))
    else:
        reports += _path_counts(ss, counters)
    return ElectionReport(n, values, leader, len(ss.states), len(ss.transitions), reports)


def _path_counts(ss, counters):
    """For each counter, check every maximal path accumulates exactly the target."""
    order = _topological(ss)
    names = list(counters)
    weights = [[counters[c][0](t[3]) for c in names] for t in ss.transitions]
    lo = [None] * len(ss.states)
    hi = [None] * len(ss.states)
    lo_k = [None] * len(ss.states)
    hi_k = [None] * len(ss.states)
    for s in reversed(order):
        if not ss.succ[s]:
            lo[s] = hi[s] = [0] * len(names)
            lo_k[s] = hi_k[s] = [None] * len(names)
            continue
        lo[s], hi[s] = [None] * len(names), [None] * len(names)
        lo_k[s], hi_k[s] = [None] * len(names), [None] * len(names)
        for k in ss.succ[s]:
            d = ss.transitions[k][2]
            for c in range(len(names)):
                a = weights[k][c] + lo[d][c]
                b = weights[k][c] + hi[d][c]
                if lo[s][c] is None or a < lo[s][c]:
                    lo[s][c], lo_k[s][c] = a, k
                if hi[s][c] is None or b > hi[s][c]:
                    hi[s][c], hi_k[s][c] = b, k
    out = []
    for c, name in enumerate(names):
        target = counters[name][1]
        s0 = ss.initial
        if lo[s0][c] == hi[s0][c] == target:
            out.append(PropertyReport(name, HOLDS))
            continue
        use_lo = lo[s0][c] != target
        choice = lo_k if use_lo else hi_k
        path, s = [], s0
        while choice[s][c] is not None:
            k = choice[s][c]
            path.append(k)
            s = ss.transitions[k][2]
        got = lo[s0][c] if use_lo else hi[s0][c]
        out.append(PropertyReport(name, FAILS, ss.labels(path), f"path with count {got}, expected {target}"))
    return out
