"""Checking concrete traces against predicted futures.

Each MPI call a rank performs consumes the matching action prefix of its
future: a send of ``m`` to ``j`` by rank ``i`` turns ``send(i, j, m) . F``
into ``F``, and likewise for recv, isend, bcast and barrier. Futures may be
nondeterministic, so the checker tracks the set of all possible residuals
and accepts when one of them can finish silently once the trace ends.

Permissions on futures are exact fractions. A future ``F || G`` held with
permission ``p`` splits into ``F`` and ``G`` whose permissions sum to ``p``;
merging is the reverse and never exceeds 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .algebra.env import Action, Environment
from .algebra.steps import can_finish, instantiate, offers
from .algebra.terms import Par, Term, format_term
from .errors import NotParallel, PermissionOverflow, UnknownAction

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FutureAssertion:
    """``Future(permission, term)``."""

    permission: Fraction
    term: Term

    def __post_init__(self):
        p = Fraction(self.permission)
        if not 0 < p <= 1:
            raise ValueError(f"permission must lie in (0, 1], got {p}")
        object.__setattr__(self, "permission", p)

    def __str__(self):
        return f"Future({self.permission}, {format_term(self.term)})"


def split(f: FutureAssertion, ratio=Fraction(1, 2)):
    """Split ``Future(p, F || G)`` into ``Future(p*ratio, F)`` and ``Future(p*(1-ratio), G)``."""
    if not isinstance(f.term, Par):
        raise NotParallel(f"cannot split {format_term(f.term)}: not a parallel composition")
    ratio = Fraction(ratio)
    if not 0 < ratio < 1:
        raise ValueError("split ratio must lie strictly between 0 and 1")
    left = f.permission * ratio
    return FutureAssertion(left, f.term.left), FutureAssertion(f.permission - left, f.term.right)


def merge(a: FutureAssertion, b: FutureAssertion) -> FutureAssertion:
    total = a.permission + b.permission
    if total > 1:
        raise PermissionOverflow(f"merged permission {total} exceeds 1")
    return FutureAssertion(total, Par(a.term, b.term))


def event_action(event) -> Optional[Action]:
    """The future action an MPI trace event corresponds to.

    Returns None for ``wait``, which completes a request without a
    counterpart in the future; raises :class:`UnknownAction` otherwise.
    """
    op, i, args = event.op, event.rank, tuple(event.args)
    if op in ("send", "recv"):
        return Action(op, (i, args[0], args[1]))
    if op == "isend":
        return Action("isend", (i, args[0], args[1], args[2]))
    if op == "bcast":
        return Action("bcast", (i, args[0]))
    if op == "barrier":
        return Action("barrier", (i,))
    if op == "wait":
        return None
    raise UnknownAction(f"trace event kind {op!r} has no future action")


def _silent_closure(terms: Iterable[Term], env: Environment) -> set:
    out = set(terms)
    todo = list(out)
    while todo:
        t = todo.pop()
        for o in offers(t, env):
            if o.name != "tau":
                continue
            for _, nxt in instantiate(o, env):
                if nxt not in out:
                    out.add(nxt)
                    todo.append(nxt)
    return out


def _consume_action(f: Term, action: Action, env: Environment) -> frozenset:
    # the request handle of isend is not interpreted by the model
    positions = 3 if action.name == "isend" else len(action.args)
    fixed = {k: action.args[k] for k in range(positions)}
    out = set()
    for t in _silent_closure((f,), env):
        for o in offers(t, env):
            if o.name != action.name or len(o.args) != len(action.args):
                continue
            for _, cont in instantiate(o, env, fixed):
                out.add(cont)
    return frozenset(out)


def consume(f: Term, event, env: Environment) -> frozenset:
    """All residuals of ``f`` after the trace event; empty if not permitted."""
    action = event_action(event)
    if action is None:
        raise UnknownAction(f"trace event kind {event.op!r} has no future action")
    return _consume_action(f, action, env)


@dataclass(frozen=True)
class Verdict:
    rank: Optional[int]
    accepted: bool
    reject_index: Optional[int] = None
    reason: Optional[str] = None

    @property
    def verdict(self) -> str:
        return "accepted" if self.accepted else "rejected"

    def to_json(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "rank": self.rank, "verdict": self.verdict}
        if not self.accepted:
            out["reject_index"] = self.reject_index
            out["reason"] = self.reason
        return out


def check_trace(init: FutureAssertion, trace, env: Environment, rank: Optional[int] = None) -> Verdict:
    """Fold :func:`consume` over ``trace`` starting from ``init``.

    Accepted iff some residual left at the end can finish using silent
    steps only. A rejection reports the index of the first event no
    residual permits, or ``len(trace)`` if the trace stops early.
    """
    if init.permission != 1:
        raise ValueError("a whole-rank trace is checked against full permission")
    if rank is None and trace:
        rank = trace[0].rank
    residuals = frozenset({init.term})
    handles = set()
    for k, e in enumerate(trace):
        try:
            action = event_action(e)
        except UnknownAction as exc:
            return Verdict(rank, False, k, str(exc))
        if action is None:
            continue
        if e.rank != rank:
            return Verdict(rank, False, k, f"event belongs to rank {e.rank}")
        if action.name == "isend":
            h = action.args[3]
            if h in handles:
                return Verdict(rank, False, k, f"request handle {h} reused")
            handles.add(h)
        nxt = set()
        for f in residuals:
            nxt |= _consume_action(f, action, env)
        if not nxt:
            return Verdict(rank, False, k, f"{action} is not permitted by the future")
        residuals = frozenset(nxt)
    if any(can_finish(t, env) for t in residuals):
        return Verdict(rank, True)
    return Verdict(rank, False, len(trace), "trace ends while the future still expects actions")
