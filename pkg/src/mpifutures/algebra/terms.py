"""Process terms of the future algebra and their substitution."""

from __future__ import annotations

from typing import Any, Mapping

from ..errors import UnboundVariable
from .expr import Expr, Lit, eval_expr, format_expr, free_vars as expr_free_vars, subst_expr
from .node import node, span_field


class Term:
    __slots__ = ()


@node
class SortRef:
    """A sort name, optionally with an inline integer interval (``Int[0..3]``)."""

    name: str
    lo: Any = None
    hi: Any = None
    span: Any = span_field()

    def __str__(self):
        if self.lo is None:
            return self.name
        return f"{self.name}[{self.lo}..{self.hi}]"


@node
class Act(Term):
    name: str
    args: tuple = ()
    span: Any = span_field()


@node
class Seq(Term):
    left: Term
    right: Term


@node
class Choice(Term):
    left: Term
    right: Term


@node
class Par(Term):
    left: Term
    right: Term


@node
class Cond(Term):
    guard: Expr
    then: Term


@node
class CondElse(Term):
    guard: Expr
    then: Term
    orelse: Term


@node
class Sum(Term):
    var: str
    sort: SortRef
    body: Term


@node
class Call(Term):
    name: str
    args: tuple = ()
    span: Any = span_field()


@node
class Epsilon(Term):
    pass


@node
class Tau(Term):
    pass


EPS = Epsilon()
TAU = Tau()


def seq(a: Term, b: Term) -> Term:
    if a == EPS:
        return b
    if b == EPS:
        return a
    return Seq(a, b)


def par(a: Term, b: Term) -> Term:
    if a == EPS:
        return b
    if b == EPS:
        return a
    return Par(a, b)


def act(name: str, *args) -> Act:
    """Convenience constructor; plain Python values become literals."""
    return Act(name, tuple(a if isinstance(a, Expr) else Lit(a) for a in args))


def call(name: str, *args) -> Call:
    return Call(name, tuple(a if isinstance(a, Expr) else Lit(a) for a in args))


def free_vars(t: Term) -> frozenset:
    try:
        return object.__getattribute__(t, "_fv")
    except AttributeError:
        pass
    if isinstance(t, (Act, Call)):
        fv = frozenset().union(*(expr_free_vars(a) for a in t.args))
    elif isinstance(t, (Seq, Choice, Par)):
        fv = free_vars(t.left) | free_vars(t.right)
    elif isinstance(t, Cond):
        fv = expr_free_vars(t.guard) | free_vars(t.then)
    elif isinstance(t, CondElse):
        fv = expr_free_vars(t.guard) | free_vars(t.then) | free_vars(t.orelse)
    elif isinstance(t, Sum):
        fv = free_vars(t.body) - {t.var}
    else:
        fv = frozenset()
    object.__setattr__(t, "_fv", fv)
    return fv


def substitute(t: Term, bindings: Mapping[str, Any]) -> Term:
    """Replace free variables of ``t`` by values (or expressions).

    Sum binders shadow outer bindings. Closed sub-expressions are folded to
    literals and conditionals whose guard folds are resolved, so equal
    behaviour tends to give equal terms. Binding values are assumed closed;
    open expressions must not mention binder names of ``t``.
    """
    if not (free_vars(t) & bindings.keys()):
        return t
    if isinstance(t, Act):
        return Act(t.name, tuple(subst_expr(a, bindings) for a in t.args), t.span)
    if isinstance(t, Call):
        return Call(t.name, tuple(subst_expr(a, bindings) for a in t.args), t.span)
    if isinstance(t, Seq):
        return seq(substitute(t.left, bindings), substitute(t.right, bindings))
    if isinstance(t, Choice):
        return Choice(substitute(t.left, bindings), substitute(t.right, bindings))
    if isinstance(t, Par):
        return par(substitute(t.left, bindings), substitute(t.right, bindings))
    if isinstance(t, Cond):
        g = subst_expr(t.guard, bindings)
        then = substitute(t.then, bindings)
        if isinstance(g, Lit) and g.value is True:
            return then
        return Cond(g, then)
    if isinstance(t, CondElse):
        g = subst_expr(t.guard, bindings)
        if isinstance(g, Lit) and type(g.value) is bool:
            return substitute(t.then if g.value else t.orelse, bindings)
        return CondElse(g, substitute(t.then, bindings), substitute(t.orelse, bindings))
    if isinstance(t, Sum):
        inner = {k: v for k, v in bindings.items() if k != t.var}
        return Sum(t.var, t.sort, substitute(t.body, inner))
    return t


def close(t: Term, bindings: Mapping[str, Any]) -> Term:
    """Substitute and insist that nothing is left free."""
    out = substitute(t, bindings)
    missing = free_vars(out)
    if missing:
        raise UnboundVariable(f"unbound variable(s) {', '.join(sorted(missing))}")
    return out


def eval_guard(g: Expr, bindings: Mapping[str, Any]) -> bool:
    from ..errors import SortError

    v = eval_expr(g, bindings)
    if type(v) is not bool:
        raise SortError(f"guard {format_expr(g)} is not boolean")
    return v


# precedence: choice 1 < par 2 < seq 3 < factor 4
def format_term(t: Term, prec: int = 0) -> str:
    if isinstance(t, Choice):
        s = f"{format_term(t.left, 1)} + {format_term(t.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(t, Par):
        s = f"{format_term(t.left, 2)} || {format_term(t.right, 3)}"
        return f"({s})" if prec > 2 else s
    if isinstance(t, Seq):
        s = f"{format_term(t.left, 3)} . {format_term(t.right, 4)}"
        return f"({s})" if prec > 3 else s
    if isinstance(t, (Act, Call)):
        if not t.args:
            return t.name
        return f"{t.name}({', '.join(format_expr(a) for a in t.args)})"
    if isinstance(t, Epsilon):
        return "eps"
    if isinstance(t, Tau):
        return "tau"
    if isinstance(t, Sum):
        s = f"sum {t.var}: {t.sort} . {format_term(t.body, 4)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Cond):
        s = f"{_guard(t.guard)} -> {format_term(t.then, 4)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, CondElse):
        s = f"{_guard(t.guard)} -> {format_term(t.then, 4)} <> {format_term(t.orelse, 4)}"
        return f"({s})" if prec > 0 else s
    raise TypeError(f"not a term: {t!r}")


def _guard(g: Expr) -> str:
    # a bare guard could be mistaken for the start of an action or call
    return f"({format_expr(g)})"
