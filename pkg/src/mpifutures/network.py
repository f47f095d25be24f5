"""Built-in environment processes: the point-to-point network, Bcast and Barrier.

They are implemented natively rather than as algebra terms. Each exposes the
actions it is currently willing to perform as :class:`BuiltinOffer` objects;
an argument equal to :data:`ANY` accepts whatever the synchronising partner
supplies (the network's ``nrecv`` sums over all messages).

Argument order follows one convention throughout: ``recv`` and ``nsend``
name the receiving rank first, ``send``, ``isend`` and ``nrecv`` name the
sending rank first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .algebra.node import node
from .algebra.values import same_value
from .errors import EmptyQueue, RankOutOfRange


class _Any:
    def __repr__(self):
        return "ANY"


ANY = _Any()


@dataclass(frozen=True)
class BuiltinOffer:
    name: str
    args: tuple
    apply: Callable = field(compare=False, repr=False)

    def accepts(self, args) -> Optional[object]:
        """Successor state for concrete ``args``, or None if refused."""
        for want, got in zip(self.args, args):
            if want is not ANY and not same_value(want, got):
                return None
        return self.apply(tuple(args))


def _is_rank(x, n):
    return type(x) is int and 0 <= x < n


@node
class ChannelTable:
    """FIFO queue per ordered (src, dst) pair; a persistent value.

    Only non-empty queues are stored, so an empty table compares equal to
    the all-empty table for the same ``n``.
    """

    n: int
    queues: tuple = ()  # sorted ((src, dst), (msg, ...)) with non-empty msgs

    def _check(self, i, j):
        if not (_is_rank(i, self.n) and _is_rank(j, self.n)):
            raise RankOutOfRange(f"channel ({i}, {j}) outside ranks 0..{self.n - 1}")

    def get(self, i, j) -> tuple:
        self._check(i, j)
        for key, msgs in self.queues:
            if key == (i, j):
                return msgs
        return ()

    def _with(self, i, j, msgs):
        rest = [(k, q) for k, q in self.queues if k != (i, j)]
        if msgs:
            rest.append(((i, j), msgs))
        return ChannelTable(self.n, tuple(sorted(rest, key=lambda kq: kq[0])))

    def enqueue(self, i, j, m) -> "ChannelTable":
        return self._with(i, j, self.get(i, j) + (m,))

    def peek(self, i, j):
        q = self.get(i, j)
        return q[0] if q else None

    def dequeue(self, i, j):
        q = self.get(i, j)
        if not q:
            raise EmptyQueue(f"queue ({i}, {j}) is empty")
        return q[0], self._with(i, j, q[1:])

    def total(self) -> int:
        return sum(len(q) for _, q in self.queues)

    def longest(self) -> int:
        return max((len(q) for _, q in self.queues), default=0)

    def is_empty(self) -> bool:
        return not self.queues

    def __str__(self):
        if not self.queues:
            return "T0"
        return "; ".join(f"Q{k}=[{', '.join(map(str, q))}]" for k, q in self.queues)


def empty_table(n: int) -> ChannelTable:
    return ChannelTable(n)


def network_steps(table: ChannelTable) -> list:
    """Offers of ``Network(T)``: deliver any queue head, accept any message."""
    out = []
    for (i, j), msgs in table.queues:
        out.append(BuiltinOffer("nsend", (j, i, msgs[0]), lambda _a, i=i, j=j: table.dequeue(i, j)[1]))

    def accept(args):
        i, j, m = args
        if not (_is_rank(i, table.n) and _is_rank(j, table.n)):
            return None
        return table.enqueue(i, j, m)

    out.append(BuiltinOffer("nrecv", (ANY, ANY, ANY), accept))
    return out


@node
class BcastState:
    """``Idle`` when ``src`` is None, else ``Handling(src, msg, remaining)``."""

    src: Optional[int] = None
    msg: object = None
    remaining: frozenset = frozenset()

    @property
    def idle(self) -> bool:
        return self.src is None

    def __str__(self):
        if self.idle:
            return "Idle"
        return f"Handling({self.src}, {self.msg}, {sorted(self.remaining)})"


BCAST_IDLE = BcastState()


def handling(src, msg, remaining) -> BcastState:
    """Handle state; with nobody left to serve it is already back to Idle."""
    remaining = frozenset(remaining)
    if not remaining:
        return BCAST_IDLE
    return BcastState(src, msg, remaining)


def bcast_steps(state: BcastState, n: int) -> list:
    """Offers of ``Bcast()``/``Handle(i, m, R)``.

    Idle accepts a request ``breq(i, m)``; Handle delivers to each remaining
    rank through ``nsend(j, i, m)`` (receiver first, matching ``recv``).
    """
    if state.idle or not state.remaining:
        def start(args):
            i, m = args
            if not _is_rank(i, n):
                return None
            return handling(i, m, frozenset(range(n)) - {i})

        return [BuiltinOffer("breq", (ANY, ANY), start)]
    return [
        BuiltinOffer(
            "nsend",
            (j, state.src, state.msg),
            lambda _a, j=j: handling(state.src, state.msg, state.remaining - {j}),
        )
        for j in sorted(state.remaining)
    ]


@node
class BarrierState:
    arrived: frozenset = frozenset()

    def __str__(self):
        return f"Barrier({sorted(self.arrived)})"


BARRIER_EMPTY = BarrierState()


def barrier_steps(state: BarrierState, n: int) -> list:
    """Offers of ``Barrier()``.

    Each rank not yet arrived may synchronise via ``barrier-ack(i)``. Once all
    ``n`` have arrived a single silent step releases them together.
    """
    if len(state.arrived) >= n:
        return [BuiltinOffer("tau", (), lambda _a: BARRIER_EMPTY)]
    return [
        BuiltinOffer("barrier-ack", (i,), lambda _a, i=i: BarrierState(state.arrived | {i}))
        for i in range(n)
        if i not in state.arrived
    ]
