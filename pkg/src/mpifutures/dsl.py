"""Text syntax for future models (``.fut`` files): parser, sort checker, printer.

A model is a header of declarations, process definitions and an ``init``
clause giving every rank's starting future::

    ranks 1..8
    int 0..15
    tag elect(Int)

    process P(v: Int) = send(0, 1, v) . P(v + 1)

    init = (i = 0) -> P(0) <> eps

Terms use ``.`` for sequence, ``+`` for choice, ``||`` for parallel,
``c -> P <> Q`` for conditionals and ``sum x: S . P`` for summation. In the
``init`` clause ``i`` is the rank and ``N`` the process count; ``N`` is in
scope everywhere.
"""

from __future__ import annotations

import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

from .algebra.env import (
    DEFAULT_ALLOW, DEFAULT_PAIRS, NETWORK_ACTIONS, CommPair, CommSpec, Environment, ProcessDef,
)
from .algebra.expr import (
    FUNCTIONS, BinOp, Expr, Func, Lit, MsgLit, SetLit, UnOp, Var, format_expr,
)
from .algebra.terms import (
    EPS, TAU, Act, Call, Choice, Cond, CondElse, Par, Seq, SortRef, Sum, Term, format_term,
)
from .errors import ModelError, ModelSyntaxError, NonFiniteSort, SortError, UndefinedReference

RESERVED_PROCESSES = {"Network", "Bcast", "Barrier", "Handle"}
KEYWORDS = {"process", "init", "sum", "eps", "tau", "mod", "div", "and", "or", "not", "in",
            "true", "false"}

# signatures of the MPI-facing actions futures may use
BUILTIN_ACTIONS = {
    "send": ("Rank", "Rank", "Data"),
    "recv": ("Rank", "Rank", "Data"),
    "isend": ("Rank", "Rank", "Data", "Int"),
    "bcast": ("Rank", "Data"),
    "barrier": ("Rank",),
}
INTERNAL_ACTIONS = NETWORK_ACTIONS - set(BUILTIN_ACTIONS)


@dataclass(frozen=True)
class SortDecl:
    name: str
    lo: Optional[int] = None
    hi: Optional[int] = None
    values: tuple = ()

    def domain(self):
        if self.lo is not None:
            return tuple(range(self.lo, self.hi + 1))
        return self.values


@dataclass(frozen=True)
class Signature:
    name: str
    sorts: tuple = ()  # SortRef


@dataclass(frozen=True)
class InitClause:
    params: tuple  # ((name, SortRef), ...)
    term: Term
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ModelFile:
    ranks: tuple = (1, 16)
    int_range: tuple = (0, 7)
    sorts: tuple = ()
    tags: tuple = ()
    actions: tuple = ()
    comms: tuple = ()  # ((a, b), ...)
    allows: tuple = ()
    defs: tuple = ()  # ProcessDef
    init: Optional[InitClause] = None
    spans: dict = field(default_factory=dict, compare=False, repr=False)  # header item -> (line, col)

    def definition(self, name):
        for d in self.defs:
            if d.name == name:
                return d
        raise UndefinedReference(f"no process named {name!r}")

    def environment(self, n: int) -> Environment:
        pairs = []
        for a, b in self.comms:
            arity = len(self._signature(a).sorts)
            pairs.append(CommPair(a, b, tuple((k, k) for k in range(arity))))
        return Environment(
            n=n,
            defs={d.name: d for d in self.defs},
            sorts={s.name: s.domain() for s in self.sorts},
            int_range=self.int_range,
            tags={t.name: t.sorts for t in self.tags},
            comm=CommSpec(DEFAULT_PAIRS + tuple(pairs)),
            allow=DEFAULT_ALLOW | set(self.allows) | {f"{a}|{b}" for a, b in self.comms},
        )

    def _signature(self, name):
        for s in self.actions:
            if s.name == name:
                return s
        raise UndefinedReference(f"undeclared action {name!r}")


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<sym>\.\.|->|<>|<=|>=|!=|\|\||[|().,:+\-*=<>{}\[\]\\])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # name, int, sym, eof
    text: str
    line: int
    col: int

    @property
    def span(self):
        return (self.line, self.col)


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", (line, pos - line_start + 1))
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("int", "name", "sym"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------- parser

class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0
        self.actions = dict(BUILTIN_ACTIONS)
        self.tags = set()

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def at(self, text, kind=None):
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind) and t.kind != "eof"

    def accept(self, text):
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text):
        if not self.at(text):
            self.fail(f"unexpected {self._describe()}", (repr(text),))
        t = self.tok
        self.pos += 1
        return t

    def name(self, what="name"):
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.fail(f"unexpected {self._describe()}", (what,))
        self.pos += 1
        return t

    def integer(self):
        neg = self.accept("-")
        t = self.tok
        if t.kind != "int":
            self.fail(f"unexpected {self._describe()}", ("integer",))
        self.pos += 1
        return -int(t.text) if neg else int(t.text)

    def _describe(self):
        t = self.tok
        return "end of input" if t.kind == "eof" else repr(t.text)

    def fail(self, msg, expected=()):
        raise ModelSyntaxError(msg, self.tok.span, expected)

    # model
    def model(self) -> ModelFile:
        fields_ = dict(sorts=[], tags=[], actions=[], comms=[], allows=[], defs=[])
        ranks, int_range, init = (1, 16), (0, 7), None
        spans = {}
        while True:
            t = self.tok
            if t.kind == "eof":
                break
            word = t.text if t.kind == "name" else None
            if word == "ranks":
                self.pos += 1
                ranks = self.interval()
            elif word == "int" and self.toks[self.pos + 1].kind in ("int", "sym") and not self.toks[self.pos + 1].text == "(":
                self.pos += 1
                int_range = self.interval()
            elif word == "sort":
                self.pos += 1
                fields_["sorts"].append(self.sort_decl())
            elif word == "tag":
                self.pos += 1
                sig = self.signature()
                self.tags.add(sig.name)
                fields_["tags"].append(sig)
            elif word == "act":
                self.pos += 1
                sig = self.signature()
                if sig.name in NETWORK_ACTIONS:
                    raise SortError(f"action {sig.name!r} is built in", t.span)
                self.actions[sig.name] = tuple(s.name for s in sig.sorts)
                fields_["actions"].append(sig)
            elif word == "comm":
                self.pos += 1
                a = self.name("action").text
                self.expect("|")
                b = self.name("action").text
                fields_["comms"].append((a, b))
                spans.setdefault(("comm", a, b), t.span)
            elif word == "allow":
                self.pos += 1
                while True:
                    sp = self.tok.span
                    item = self.allow_item()
                    fields_["allows"].append(item)
                    spans.setdefault(("allow", item), sp)
                    if not self.accept(","):
                        break
            elif word == "process":
                self.pos += 1
                fields_["defs"].append(self.process_def())
            elif word == "init":
                if init is not None:
                    self.fail("duplicate init clause")
                self.pos += 1
                params = self.params() if self.at("(") else ()
                self.expect("=")
                init = InitClause(params, self.term(), t.span)
            else:
                self.fail(f"unexpected {self._describe()}",
                          ("ranks", "int", "sort", "tag", "act", "comm", "allow", "process", "init"))
        return ModelFile(ranks, int_range, tuple(fields_["sorts"]), tuple(fields_["tags"]),
                         tuple(fields_["actions"]), tuple(fields_["comms"]), tuple(fields_["allows"]),
                         tuple(fields_["defs"]), init, spans)

    def interval(self):
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        if hi < lo:
            raise ModelSyntaxError(f"empty interval {lo}..{hi}", self.tok.span)
        return (lo, hi)

    def sort_decl(self):
        name = self.name("sort name")
        self.expect("=")
        if self.accept("{"):
            vals = [self.integer()]
            while self.accept(","):
                vals.append(self.integer())
            self.expect("}")
            return SortDecl(name.text, values=tuple(vals))
        lo, hi = self.interval()
        return SortDecl(name.text, lo, hi)

    def signature(self):
        name = self.name().text
        sorts = []
        if self.accept("("):
            if not self.at(")"):
                sorts.append(self.sort_ref())
                while self.accept(","):
                    sorts.append(self.sort_ref())
            self.expect(")")
        return Signature(name, tuple(sorts))

    def allow_item(self):
        a = self.name("action").text
        if self.accept("|"):
            return f"{a}|{self.name('action').text}"
        return a

    def sort_ref(self):
        tok = self.name("sort")
        if self.accept("["):
            lo, hi = self.interval()
            self.expect("]")
            return SortRef(tok.text, lo, hi, tok.span)
        return SortRef(tok.text, span=tok.span)

    def params(self):
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                p = self.name("parameter").text
                self.expect(":")
                out.append((p, self.sort_ref()))
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def process_def(self):
        name = self.name("process name")
        if name.text in RESERVED_PROCESSES:
            raise ModelSyntaxError(f"{name.text} is a reserved built-in process", name.span)
        params = self.params() if self.at("(") else ()
        self.expect("=")
        return ProcessDef(name.text, params, self.term(), name.span)

    # terms
    def term(self) -> Term:
        t = self.par()
        while self.accept("+"):
            t = Choice(t, self.par())
        return t

    def par(self) -> Term:
        t = self.seq()
        while self.accept("||"):
            t = Par(t, self.seq())
        return t

    def seq(self) -> Term:
        t = self.factor()
        while self.accept("."):
            t = Seq(t, self.factor())
        return t

    def factor(self) -> Term:
        t = self.tok
        if t.kind == "name" and t.text == "eps":
            self.pos += 1
            return EPS
        if t.kind == "name" and t.text == "tau":
            self.pos += 1
            return TAU
        if t.kind == "name" and t.text == "sum":
            self.pos += 1
            var = self.name("variable").text
            self.expect(":")
            sort = self.sort_ref()
            self.expect(".")
            return Sum(var, sort, self.factor())
        guarded = self.try_guard()
        if guarded is not None:
            return guarded
        if self.accept("("):
            inner = self.term()
            self.expect(")")
            return inner
        if t.kind == "name" and t.text not in KEYWORDS:
            self.pos += 1
            args = ()
            if self.accept("("):
                args = self.args(")")
            if t.text in self.actions:
                return Act(t.text, args, t.span)
            return Call(t.text, args, t.span)
        self.fail(f"unexpected {self._describe()}", ("action", "process call", "'('", "eps", "tau", "sum"))

    def try_guard(self):
        start = self.pos
        try:
            guard = self.expr()
        except ModelSyntaxError:
            self.pos = start
            return None
        if not self.accept("->"):
            self.pos = start
            return None
        then = self.factor()
        if self.accept("<>"):
            return CondElse(guard, then, self.factor())
        return Cond(guard, then)

    def args(self, close):
        out = []
        if not self.at(close):
            out.append(self.expr())
            while self.accept(","):
                out.append(self.expr())
        self.expect(close)
        return tuple(out)

    # expressions
    def expr(self) -> Expr:
        e = self.conj()
        while self.at("or", "name"):
            sp = self.tok.span
            self.pos += 1
            e = BinOp("or", e, self.conj(), sp)
        return e

    def conj(self):
        e = self.neg()
        while self.at("and", "name"):
            sp = self.tok.span
            self.pos += 1
            e = BinOp("and", e, self.neg(), sp)
        return e

    def neg(self):
        if self.at("not", "name"):
            sp = self.tok.span
            self.pos += 1
            return UnOp("not", self.neg(), sp)
        return self.comparison()

    def comparison(self):
        e = self.additive()
        t = self.tok
        if (t.kind == "sym" and t.text in ("=", "!=", "<", "<=", ">", ">=")) or (t.kind == "name" and t.text == "in"):
            self.pos += 1
            e = BinOp(t.text, e, self.additive(), t.span)
        return e

    def additive(self):
        e = self.multiplicative()
        while self.tok.kind == "sym" and self.tok.text in ("+", "-", "\\"):
            t = self.tok
            self.pos += 1
            e = BinOp(t.text, e, self.multiplicative(), t.span)
        return e

    def multiplicative(self):
        e = self.unary()
        while (self.tok.kind == "sym" and self.tok.text == "*") or (self.tok.kind == "name" and self.tok.text in ("div", "mod")):
            t = self.tok
            self.pos += 1
            e = BinOp(t.text, e, self.unary(), t.span)
        return e

    def unary(self):
        if self.at("-", "sym"):
            sp = self.tok.span
            self.pos += 1
            return UnOp("-", self.unary(), sp)
        return self.atom()

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.pos += 1
            return Lit(int(t.text))
        if t.kind == "name" and t.text in ("true", "false"):
            self.pos += 1
            return Lit(t.text == "true")
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("{"):
            return SetLit(self.args("}"), t.span)
        if t.kind == "name" and t.text not in KEYWORDS:
            self.pos += 1
            if t.text in self.tags and self.at("<>"):
                self.pos += 1
                return MsgLit(t.text, (), t.span)
            if t.text in self.tags and self.accept("<"):
                items = [self.additive()]
                while self.accept(","):
                    items.append(self.additive())
                self.expect(">")
                return MsgLit(t.text, tuple(items), t.span)
            if self.at("("):
                if t.text not in FUNCTIONS:
                    self.fail(f"{t.text} is not a function")
                self.pos += 1
                return Func(t.text, self.args(")"), t.span)
            return Var(t.text, t.span)
        self.fail(f"unexpected {self._describe()}", ("expression",))


def parse_model(text: str, check: bool = True) -> ModelFile:
    """Parse (and by default sort-check) a model.

    Raises :class:`ModelSyntaxError`, :class:`SortError` or
    :class:`UndefinedReference`; all carry a ``(line, column)`` span when
    the position is known.
    """
    model = Parser(text).model()
    if check:
        check_model(model)
    return model


def parse_term(text: str, model: Optional[ModelFile] = None) -> Term:
    """Parse a single term, using ``model``'s declarations for actions and tags."""
    p = Parser(text)
    if model is not None:
        p.tags = {t.name for t in model.tags}
        p.actions.update({a.name: tuple(s.name for s in a.sorts) for a in model.actions})
    t = p.term()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p._describe()}", ("end of input",))
    return t


# ---------------------------------------------------------------- sort checker

_SORT_TYPE = {"Int": "Int", "Rank": "Int", "Bool": "Bool", "Msg": "Msg", "Data": "Data", "Set": "Set"}


class Checker:
    def __init__(self, model: ModelFile):
        self.model = model
        self.user_sorts = {s.name for s in model.sorts}
        self.tags = {t.name: t.sorts for t in model.tags}
        self.actions = {name: tuple(SortRef(s) for s in sig) for name, sig in BUILTIN_ACTIONS.items()}
        self.actions.update({a.name: a.sorts for a in model.actions})
        self.defs = {}
        for d in model.defs:
            if d.name in self.defs:
                raise ModelError(f"duplicate process {d.name!r}", d.span)
            self.defs[d.name] = d

    def sort_type(self, s: SortRef, span=None) -> str:
        if s.lo is not None:
            if s.name != "Int":
                raise SortError(f"interval bounds only apply to Int, not {s.name}", span)
            return "Int"
        if s.name in _SORT_TYPE:
            return _SORT_TYPE[s.name]
        if s.name in self.user_sorts:
            return "Int"
        raise UndefinedReference(f"unknown sort {s.name!r}", span)

    @staticmethod
    def fits(expected, actual):
        return expected == actual or actual == "Any" or (expected == "Data" and actual in ("Int", "Msg"))

    def check(self):
        for s in self.model.tags + self.model.actions:
            for ref in s.sorts:
                self.sort_type(ref, ref.span)
        spans = self.model.spans
        for a, b in self.model.comms:
            sp = spans.get(("comm", a, b))
            for x in (a, b):
                if x not in self.actions:
                    raise UndefinedReference(f"comm pair names undeclared action {x!r}", sp)
            if len(self.actions[a]) != len(self.actions[b]):
                raise SortError(f"comm pair {a}|{b} joins actions of different arity", sp)
        for item in self.model.allows:
            for x in item.split("|"):
                if x not in self.actions and x != "tau":
                    raise UndefinedReference(f"allow names undeclared action {x!r}", spans.get(("allow", item)))
        for d in self.defs.values():
            scope = {"N": "Int"}
            with _located(d.span):
                for p, s in d.params:
                    scope[p] = self.sort_type(s, s.span)
                self.term(d.body, scope)
        init = self.model.init
        if init is not None:
            scope = {"N": "Int", "i": "Int"}
            with _located(init.span):
                for p, s in init.params:
                    scope[p] = self.sort_type(s, s.span)
                self.term(init.term, scope)

    def term(self, t: Term, scope):
        if isinstance(t, Act):
            if t.name in INTERNAL_ACTIONS:
                raise SortError(f"{t.name} is internal to the network model", t.span)
            sig = self.actions.get(t.name)
            if sig is None:
                raise UndefinedReference(f"undeclared action {t.name!r}", t.span)
            self._args(t.name, sig, t.args, scope, t.span)
        elif isinstance(t, Call):
            d = self.defs.get(t.name)
            if t.name in INTERNAL_ACTIONS:
                raise SortError(f"{t.name} is internal to the network model", t.span)
            if d is None:
                if t.name in RESERVED_PROCESSES:
                    raise SortError(f"{t.name} is a built-in process and cannot be called from a future", t.span)
                raise UndefinedReference(f"undefined process {t.name!r}", t.span)
            self._args(t.name, tuple(s for _, s in d.params), t.args, scope, t.span)
        elif isinstance(t, (Seq, Choice, Par)):
            self.term(t.left, scope)
            self.term(t.right, scope)
        elif isinstance(t, Cond):
            self._guard(t.guard, scope)
            self.term(t.then, scope)
        elif isinstance(t, CondElse):
            self._guard(t.guard, scope)
            self.term(t.then, scope)
            self.term(t.orelse, scope)
        elif isinstance(t, Sum):
            ty = self.sort_type(t.sort, t.sort.span)
            if ty in ("Set", "Data"):
                raise NonFiniteSort(f"cannot sum over {t.sort}", t.sort.span)
            self.term(t.body, {**scope, t.var: ty})

    def _guard(self, g, scope):
        ty = self.expr(g, scope)
        if not self.fits("Bool", ty):
            raise SortError(f"guard {format_expr(g)} has sort {ty}, expected Bool", getattr(g, "span", None))

    def _args(self, name, sig, args, scope, span):
        if len(sig) != len(args):
            raise SortError(f"{name} expects {len(sig)} argument(s), got {len(args)}", span)
        for s, a in zip(sig, args):
            want = self.sort_type(s, span)
            got = self.expr(a, scope)
            if not self.fits(want, got):
                raise SortError(f"argument {format_expr(a)} of {name} has sort {got}, expected {want}", span)

    def expr(self, e: Expr, scope) -> str:
        sp = getattr(e, "span", None)
        if isinstance(e, Lit):
            return e.kind
        if isinstance(e, Var):
            if e.name not in scope:
                raise UndefinedReference(f"unbound variable {e.name!r}", sp)
            return scope[e.name]
        if isinstance(e, BinOp):
            a, b = self.expr(e.left, scope), self.expr(e.right, scope)
            if e.op in ("+", "-", "*", "div", "mod", "<", "<=", ">", ">="):
                if not (self.fits("Int", a) and self.fits("Int", b)):
                    raise SortError(f"operator {e.op} expects Int operands", sp)
                return "Int" if e.op in ("+", "-", "*", "div", "mod") else "Bool"
            if e.op in ("=", "!="):
                if not (self.fits(a, b) or self.fits(b, a)):
                    raise SortError(f"cannot compare {a} with {b}", sp)
                return "Bool"
            if e.op in ("and", "or"):
                if not (self.fits("Bool", a) and self.fits("Bool", b)):
                    raise SortError(f"operator {e.op} expects Bool operands", sp)
                return "Bool"
            if e.op == "in":
                if not self.fits("Set", b):
                    raise SortError("'in' expects a set on the right", sp)
                return "Bool"
            if e.op == "\\":
                if not (self.fits("Set", a) and self.fits("Set", b)):
                    raise SortError("set difference expects sets", sp)
                return "Set"
        if isinstance(e, UnOp):
            a = self.expr(e.operand, scope)
            want = "Bool" if e.op == "not" else "Int"
            if not self.fits(want, a):
                raise SortError(f"operator {e.op} expects {want}", sp)
            return want
        if isinstance(e, Func):
            if FUNCTIONS.get(e.name) != len(e.args):
                raise SortError(f"{e.name} expects {FUNCTIONS.get(e.name)} argument(s)", sp)
            for a in e.args:
                if not self.fits("Int", self.expr(a, scope)):
                    raise SortError(f"{e.name} expects Int arguments", sp)
            return "Int"
        if isinstance(e, MsgLit):
            sig = self.tags.get(e.tag)
            if sig is None:
                raise UndefinedReference(f"undeclared message tag {e.tag!r}", sp)
            self._args(e.tag, sig, e.args, scope, sp)
            return "Msg"
        if isinstance(e, SetLit):
            for a in e.items:
                self.expr(a, scope)
            return "Set"
        raise SortError(f"cannot type {e!r}", sp)


@contextmanager
def _located(span):
    """Give span-less diagnostics the position of the enclosing definition."""
    try:
        yield
    except ModelError as exc:
        if exc.span is None and span is not None:
            exc.span = span
            exc.args = (f"{span[0]}:{span[1]}: {exc.message}",)
        raise


def check_model(model: ModelFile) -> None:
    Checker(model).check()


# ---------------------------------------------------------------- printer

def _sig(s: Signature) -> str:
    return s.name + (f"({', '.join(map(str, s.sorts))})" if s.sorts else "")


def _params(params) -> str:
    return f"({', '.join(f'{p}: {s}' for p, s in params)})" if params else ""


def pretty(model: ModelFile) -> str:
    """Canonical text of ``model``; ``parse_model(pretty(m)) == m``."""
    lines = [f"ranks {model.ranks[0]}..{model.ranks[1]}", f"int {model.int_range[0]}..{model.int_range[1]}"]
    for s in model.sorts:
        if s.lo is not None:
            lines.append(f"sort {s.name} = {s.lo}..{s.hi}")
        else:
            lines.append(f"sort {s.name} = {{{', '.join(map(str, s.values))}}}")
    lines += [f"tag {_sig(t)}" for t in model.tags]
    lines += [f"act {_sig(a)}" for a in model.actions]
    lines += [f"comm {a}|{b}" for a, b in model.comms]
    if model.allows:
        lines.append(f"allow {', '.join(model.allows)}")
    for d in model.defs:
        lines.append("")
        lines.append(f"process {d.name}{_params(d.params)} =")
        lines.append(f"  {format_term(d.body)}")
    if model.init is not None:
        lines.append("")
        lines.append(f"init{_params(model.init.params)} =")
        lines.append(f"  {format_term(model.init.term)}")
    return "\n".join(lines) + "\n"
