"""A simulated SPMD MPI runtime with a controllable scheduler.

A program is a function ``program(rank, size)`` returning a generator that
yields MPI calls and receives their results::

    def ping(rank, size):
        if rank == 0:
            yield Send(1, Msg("ping"))
        else:
            msg = yield Recv(0)

``Recv`` resumes with the received message, ``ISend`` with a
:class:`RequestHandle`; other calls resume with None. Returning from the
generator (or yielding :class:`Finish`) ends the rank.

All ranks share one scheduler. At each point the runtime lists the enabled
events (buffer a send, rendezvous with a posted receive, deliver a queued
message, complete a wait, release a barrier) and a schedule picks one.
Generators cannot be copied, so a rank's state is the tuple of results it
has been fed; the pending call for a state is found by replaying the
program, with results cached.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .algebra.values import Msg, value_from_json, value_to_json
from .errors import BoundExceeded, ProgramFault
from .network import ANY


# ---------------------------------------------------------------- MPI calls

@dataclass(frozen=True)
class RequestHandle:
    id: int


@dataclass(frozen=True)
class Send:
    dst: int
    msg: object


@dataclass(frozen=True)
class Recv:
    src: object = ANY


@dataclass(frozen=True)
class ISend:
    dst: int
    msg: object


@dataclass(frozen=True)
class Wait:
    handle: RequestHandle


@dataclass(frozen=True)
class Bcast:
    msg: object


@dataclass(frozen=True)
class Barrier:
    pass


@dataclass(frozen=True)
class Finish:
    pass


MpiCall = Union[Send, Recv, ISend, Wait, Bcast, Barrier, Finish]
FINISH = Finish()


@dataclass(frozen=True)
class TraceEvent:
    rank: int
    seq: int
    op: str
    args: tuple
    peer: Optional[int]
    ts: int

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "seq": self.seq,
            "op": self.op,
            "args": [value_to_json(a) for a in self.args],
            "peer": self.peer,
            "ts": self.ts,
        }

    @classmethod
    def from_json(cls, obj) -> "TraceEvent":
        return cls(obj["rank"], obj["seq"], obj["op"], tuple(value_from_json(a) for a in obj["args"]),
                   obj.get("peer"), obj["ts"])


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class Seeded:
    seed: int = 0


@dataclass(frozen=True)
class Scripted:
    """Explicit choices: index into the enabled-event list at each step.

    Once the script is used up the first enabled event is taken.
    """

    choices: tuple = ()


@dataclass(frozen=True)
class Exhaustive:
    depth_bound: int = 100


# ---------------------------------------------------------------- runtime state

@dataclass(frozen=True)
class _Rank:
    results: tuple = ()
    sub: int = 0  # broadcast sends already completed
    handles: int = 0


@dataclass(frozen=True)
class _State:
    ranks: tuple
    channels: tuple = ()  # sorted ((src, dst), ((msg, send_id), ...)) for non-empty queues
    delivered: frozenset = frozenset()
    traces: tuple = ()  # per rank: ((op, args, peer, ts), ...)
    clock: int = 0
    order: tuple = ()  # global (rank, op, args) sequence, only kept for observe="global"


@dataclass
class RunResult:
    traces: list  # per rank list of TraceEvent
    outcome: str  # completed | deadlocked | bound-exceeded
    steps: int

    def observables(self) -> tuple:
        return tuple(tuple(_observe(e.op, e.args, e.peer) for e in tr if e.op in OBSERVED)
                     for tr in self.traces)


@dataclass(frozen=True)
class Outcome:
    """One distinct observable result of :func:`run_all`."""

    status: str
    traces: tuple  # per rank tuple of (op, peer, data)
    order: tuple = ()


OBSERVED = ("send", "recv", "isend", "bcast", "barrier")


def _observe(op, args, peer):
    if op in ("send", "isend"):
        return (op, args[0], args[1])
    if op == "recv":
        return (op, args[0], args[1])
    if op == "bcast":
        return (op, None, args[0])
    return (op, None, None)


class Runtime:
    """Step semantics of the simulated MPI world for one program and size."""

    def __init__(self, program: Callable, n: int, wait: str = "delivery", observe: str = "local"):
        if n < 1:
            raise ValueError("need at least one rank")
        if wait not in ("delivery", "buffered"):
            raise ValueError("wait must be 'delivery' or 'buffered'")
        self.program = program
        self.n = n
        self.wait = wait
        self.observe = observe
        self._calls = {}

    # replay ---------------------------------------------------------------
    def call(self, rank: int, results: tuple) -> MpiCall:
        key = (rank, results)
        c = self._calls.get(key)
        if c is None:
            c = self._replay(rank, results)
            self._calls[key] = c
        return c

    def _replay(self, rank, results):
        try:
            gen = self.program(rank, self.n)
            if gen is None:
                return FINISH
            c = next(gen)
            for r in results:
                c = gen.send(r)
        except StopIteration:
            return FINISH
        except ProgramFault:
            raise
        except Exception as exc:
            raise ProgramFault(f"rank {rank} raised {exc!r}") from exc
        self._validate(rank, c)
        return c

    def _validate(self, rank, c):
        def rank_ok(x):
            return type(x) is int and 0 <= x < self.n

        if isinstance(c, (Send, ISend)):
            if not rank_ok(c.dst):
                raise ProgramFault(f"rank {rank}: destination {c.dst!r} is not a rank")
        elif isinstance(c, Recv):
            if c.src is not ANY and not rank_ok(c.src):
                raise ProgramFault(f"rank {rank}: source {c.src!r} is not a rank")
        elif isinstance(c, Wait):
            if not isinstance(c.handle, RequestHandle):
                raise ProgramFault(f"rank {rank}: wait needs a request handle")
        elif not isinstance(c, (Bcast, Barrier, Finish)):
            raise ProgramFault(f"rank {rank} issued {c!r}, which is not an MPI call")

    # state ----------------------------------------------------------------
    def initial(self) -> _State:
        return _State(tuple(_Rank() for _ in range(self.n)), traces=((),) * self.n)

    def current(self, st: _State, r: int):
        """Pending call of rank ``r``; a broadcast in progress shows as its next send."""
        rs = st.ranks[r]
        c = self.call(r, rs.results)
        if isinstance(c, Bcast):
            targets = [j for j in range(self.n) if j != r]
            if rs.sub < len(targets):
                return c, Send(targets[rs.sub], c.msg)
            return c, None
        return c, c

    def finished(self, st: _State) -> bool:
        return all(isinstance(self.call(r, st.ranks[r].results), Finish) for r in range(self.n))

    @staticmethod
    def _queue(st, i, j):
        for k, q in st.channels:
            if k == (i, j):
                return q
        return ()

    @staticmethod
    def _set_queue(st, i, j, q):
        rest = [(k, v) for k, v in st.channels if k != (i, j)]
        if q:
            rest.append(((i, j), q))
        return tuple(sorted(rest, key=lambda kv: kv[0]))

    def enabled(self, st: _State) -> list:
        """Enabled events in a fixed order."""
        out = []
        at_barrier = 0
        for r in range(self.n):
            call, eff = self.current(st, r)
            if isinstance(call, Bcast) and eff is None:
                out.append(("bcast-done", r))
            elif isinstance(eff, Send):
                out.append(("buffer", r))
                _, oeff = self.current(st, eff.dst)
                if (isinstance(oeff, Recv) and oeff.src in (ANY, r) and eff.dst != r
                        and not self._queue(st, r, eff.dst)):
                    out.append(("rendezvous", r))
            elif isinstance(eff, Recv):
                sources = range(self.n) if eff.src is ANY else (eff.src,)
                for s in sources:
                    if self._queue(st, s, r):
                        out.append(("deliver", r, s))
            elif isinstance(eff, ISend):
                out.append(("isend", r))
            elif isinstance(eff, Wait):
                h = eff.handle.id
                if h >= st.ranks[r].handles:
                    raise ProgramFault(f"rank {r} waits on unknown request {h}")
                if self.wait == "buffered" or (r, "i", h) in st.delivered:
                    out.append(("wait", r))
            elif isinstance(eff, Barrier):
                at_barrier += 1
        if at_barrier == self.n:
            out.append(("release",))
        return out

    def apply(self, st: _State, ev) -> _State:
        kind = ev[0]
        ranks = list(st.ranks)
        traces = list(st.traces)
        channels, delivered, clock = st.channels, st.delivered, st.clock
        order = list(st.order)

        def record(r, op, args, peer):
            nonlocal clock
            clock += 1
            traces[r] = traces[r] + ((op, tuple(args), peer, clock),)
            if self.observe == "global":
                order.append((r, op, tuple(args)))

        def advance(r, result=None):
            rs = ranks[r]
            ranks[r] = _Rank(rs.results + (result,), 0, rs.handles)

        if kind == "release":
            for r in range(self.n):
                record(r, "barrier", (), None)
                advance(r)
        elif kind == "bcast-done":
            r = ev[1]
            record(r, "bcast", (self.call(r, ranks[r].results).msg,), None)
            advance(r)
        elif kind in ("buffer", "rendezvous"):
            r = ev[1]
            call, eff = self.current(st, r)
            sid = (r, "s", len(ranks[r].results), ranks[r].sub)
            if kind == "buffer":
                q = self._queue(st, r, eff.dst) + ((eff.msg, sid),)
                channels = self._set_queue(st, r, eff.dst, q)
            else:
                delivered = delivered | {sid}
                record(eff.dst, "recv", (r, eff.msg), r)
                advance(eff.dst, eff.msg)
            if isinstance(call, Bcast):
                rs = ranks[r]
                ranks[r] = _Rank(rs.results, rs.sub + 1, rs.handles)
            else:
                record(r, "send", (eff.dst, eff.msg), eff.dst)
                advance(r)
        elif kind == "deliver":
            _, r, s = ev
            q = self._queue(st, s, r)
            (msg, sid), rest = q[0], q[1:]
            channels = self._set_queue(st, s, r, rest)
            delivered = delivered | {sid}
            record(r, "recv", (s, msg), s)
            advance(r, msg)
        elif kind == "isend":
            r = ev[1]
            _, eff = self.current(st, r)
            rs = ranks[r]
            h = RequestHandle(rs.handles)
            q = self._queue(st, r, eff.dst) + ((eff.msg, (r, "i", h.id)),)
            channels = self._set_queue(st, r, eff.dst, q)
            record(r, "isend", (eff.dst, eff.msg, h.id), eff.dst)
            ranks[r] = _Rank(rs.results + (h,), 0, rs.handles + 1)
        elif kind == "wait":
            r = ev[1]
            _, eff = self.current(st, r)
            record(r, "wait", (eff.handle.id,), None)
            advance(r)
        else:
            raise ValueError(f"unknown event {ev!r}")
        return _State(tuple(ranks), channels, delivered, tuple(traces), clock, tuple(order))

    def result(self, st: _State, outcome: str, steps: int) -> RunResult:
        traces = []
        for r, tr in enumerate(st.traces):
            traces.append([TraceEvent(r, k, op, args, peer, ts) for k, (op, args, peer, ts) in enumerate(tr)])
        return RunResult(traces, outcome, steps)


def run(program: Callable, n: int, schedule: Union[Seeded, Scripted] = Seeded(0),
        max_steps: int = 100_000, wait: str = "delivery") -> RunResult:
    """Execute one schedule of ``program`` on ``n`` ranks."""
    rt = Runtime(program, n, wait)
    st = rt.initial()
    rng = random.Random(schedule.seed) if isinstance(schedule, Seeded) else None
    script = list(schedule.choices) if isinstance(schedule, Scripted) else None
    if rng is None and script is None:
        raise TypeError("run takes a Seeded or Scripted schedule; use run_all for exhaustive search")
    steps = 0
    while True:
        evs = rt.enabled(st)
        if not evs:
            return rt.result(st, "completed" if rt.finished(st) else "deadlocked", steps)
        if steps >= max_steps:
            return rt.result(st, "bound-exceeded", steps)
        if rng is not None:
            ev = evs[rng.randrange(len(evs))]
        else:
            k = script[steps] if steps < len(script) else 0
            if not 0 <= k < len(evs):
                raise ValueError(f"scripted choice {k} out of range at step {steps} ({len(evs)} enabled)")
            ev = evs[k]
        st = rt.apply(st, ev)
        steps += 1


def run_all(program: Callable, n: int, depth_bound: int = 100, observe: str = "local",
            wait: str = "delivery") -> set:
    """Every distinct observable outcome over all schedules.

    Outcomes record each rank's send/recv/isend/bcast/barrier sequence and
    whether the run completed or deadlocked; with ``observe="global"`` the
    global order of events is part of the outcome too. Raises
    :class:`BoundExceeded` if some schedule runs longer than ``depth_bound``.
    """
    if observe not in ("local", "global"):
        raise ValueError("observe must be 'local' or 'global'")
    rt = Runtime(program, n, wait, observe)
    outcomes = set()
    seen = set()
    stack = [(rt.initial(), 0)]
    while stack:
        st, depth = stack.pop()
        key = (st.ranks, st.channels, st.delivered, _strip(st.traces), st.order)
        if key in seen:
            continue
        seen.add(key)
        evs = rt.enabled(st)
        if not evs:
            status = "completed" if rt.finished(st) else "deadlocked"
            res = rt.result(st, status, depth)
            order = tuple((r, op) for r, op, _ in st.order)
            outcomes.add(Outcome(status, res.observables(), order))
            continue
        if depth >= depth_bound:
            raise BoundExceeded(f"a schedule exceeds {depth_bound} events")
        for ev in reversed(evs):
            stack.append((rt.apply(st, ev), depth + 1))
    return outcomes


def _strip(traces):
    return tuple(tuple(e[:3] for e in tr) for tr in traces)


# ---------------------------------------------------------------- trace files

def write_traces(result: RunResult, outdir) -> list:
    """Write ``rank{i}.jsonl`` per rank; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for r, tr in enumerate(result.traces):
        p = outdir / f"rank{r}.jsonl"
        p.write_text("".join(json.dumps(e.to_json()) + "\n" for e in tr))
        paths.append(p)
    return paths


def read_trace(path) -> list:
    events = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            events.append(TraceEvent.from_json(json.loads(line)))
    return events


# ---------------------------------------------------------------- built-in programs

def election_program(values: Sequence[int]) -> Callable:
    """The ring leader election: rank ``i`` starts with ``values[i]``.

    Each of ``N`` rounds sends the largest value seen so far to the right
    neighbour and receives the left neighbour's; afterwards the rank whose
    own value survived broadcasts ``lead<i>``, the others receive it, and
    everybody meets at a barrier. The program returns (via the generator's
    return value) the leader it learned.
    """
    values = tuple(values)

    def program(rank, size):
        v = values[rank]
        h = v
        for _ in range(size):
            yield Send((rank + 1) % size, Msg("elect", (h,)))
            m = yield Recv((rank - 1) % size)
            h = max(h, m.payload[0])
        if h == v:
            yield Bcast(Msg("lead", (rank,)))
            leader = rank
        else:
            m = yield Recv(ANY)
            leader = m.payload[0]
        yield Barrier()
        return leader

    return program


def reported_leaders(result: RunResult) -> list:
    """Leader each rank learned in an election run (from its trace)."""
    out = []
    for r, tr in enumerate(result.traces):
        leader = None
        for e in tr:
            if e.op == "bcast":
                leader = r
            elif e.op == "recv" and isinstance(e.args[1], Msg) and e.args[1].tag == "lead":
                leader = e.args[1].payload[0]
        out.append(leader)
    return out
