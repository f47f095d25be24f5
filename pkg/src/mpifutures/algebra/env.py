"""Evaluation environment: process definitions, sort domains, communication pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping

from ..errors import NonFiniteSort, UndefinedReference, UnknownProcess
from .terms import SortRef, Term
from .values import Msg, format_value, kind_of


@dataclass(frozen=True)
class Action:
    name: str
    args: tuple = ()

    def __str__(self):
        if self.name == "tau" and not self.args:
            return "tau"
        return f"{self.name}({', '.join(format_value(a) for a in self.args)})"


@dataclass(frozen=True)
class MultiActionLabel:
    """One transition label: a lone action or a synchronised pair."""

    name: str
    parts: tuple

    def __str__(self):
        return "|".join(str(p) for p in self.parts)


TAU_LABEL = MultiActionLabel("tau", (Action("tau"),))


@dataclass(frozen=True)
class CommPair:
    """Actions ``a`` and ``b`` fire together when their data agree.

    ``mapping`` lists corresponding argument positions ``(pos_in_a, pos_in_b)``;
    positions outside it (the request handle of ``isend``) are not compared.
    """

    a: str
    b: str
    mapping: tuple

    @property
    def label(self):
        return f"{self.a}|{self.b}"


def _ident(k):
    return tuple((i, i) for i in range(k))


DEFAULT_PAIRS = (
    CommPair("send", "nrecv", _ident(3)),
    CommPair("recv", "nsend", _ident(3)),
    CommPair("send", "recv", _ident(3)),
    CommPair("isend", "nrecv", _ident(3)),
    CommPair("bcast", "breq", _ident(2)),
    CommPair("barrier", "barrier-ack", _ident(1)),
)

DEFAULT_ALLOW = frozenset(p.label for p in DEFAULT_PAIRS) | {"tau"}

NETWORK_ACTIONS = frozenset(
    {"send", "recv", "isend", "nsend", "nrecv", "bcast", "breq", "barrier", "barrier-ack"}
)


@dataclass(frozen=True)
class CommSpec:
    pairs: tuple = DEFAULT_PAIRS

    def pairs_for(self, name):
        return [p for p in self.pairs if name in (p.a, p.b)]

    def with_pairs(self, extra):
        return CommSpec(self.pairs + tuple(extra))


@dataclass(frozen=True)
class ProcessDef:
    name: str
    params: tuple  # ((name, SortRef), ...)
    body: Term
    span: object = field(default=None, compare=False, repr=False)


@dataclass
class Environment:
    """Everything needed to compute steps for a fixed process count ``n``.

    Holds per-environment caches; terms are immutable so caching by term is safe.
    """

    n: int
    defs: Mapping[str, ProcessDef] = field(default_factory=dict)
    sorts: Mapping[str, tuple] = field(default_factory=dict)
    int_range: tuple = (0, 7)
    tags: Mapping[str, tuple] = field(default_factory=dict)
    comm: CommSpec = field(default_factory=CommSpec)
    allow: frozenset = DEFAULT_ALLOW

    def __post_init__(self):
        self._domains = {}
        self._members = {}
        self.offer_cache = {}
        self.term_cache = {}
        self.base = {"N": self.n}

    def definition(self, name):
        try:
            return self.defs[name]
        except KeyError:
            raise UnknownProcess(f"call to undefined process {name!r}") from None

    def domain(self, sort: SortRef) -> tuple:
        try:
            return self._domains[sort]
        except KeyError:
            pass
        dom = self._compute_domain(sort)
        self._domains[sort] = dom
        self._members[sort] = frozenset((kind_of(v), v) for v in dom)
        return dom

    def in_domain(self, sort: SortRef, value) -> bool:
        self.domain(sort)
        try:
            return (kind_of(value), value) in self._members[sort]
        except TypeError:
            return False

    def _compute_domain(self, sort: SortRef) -> tuple:
        if sort.lo is not None:
            if sort.name != "Int":
                raise NonFiniteSort(f"interval bounds only apply to Int, not {sort.name}")
            return tuple(range(sort.lo, sort.hi + 1))
        name = sort.name
        if name == "Int":
            lo, hi = self.int_range
            return tuple(range(lo, hi + 1))
        if name == "Rank":
            return tuple(range(self.n))
        if name == "Bool":
            return (False, True)
        if name == "Msg":
            out = []
            for tag, arg_sorts in self.tags.items():
                for payload in product(*(self.domain(s) for s in arg_sorts)):
                    out.append(Msg(tag, tuple(payload)))
            return tuple(out)
        if name in self.sorts:
            return tuple(self.sorts[name])
        if name in ("Set", "Data"):
            raise NonFiniteSort(f"cannot enumerate sort {name}")
        raise UndefinedReference(f"unknown sort {name!r}")

    @property
    def lone_allowed(self):
        return {a for a in self.allow if "|" not in a}
