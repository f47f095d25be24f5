"""Data expressions: guards and action/call arguments."""

from __future__ import annotations

from typing import Any, Mapping

from ..errors import SortError, UnboundVariable
from .node import node, span_field
from .values import Msg, Value, format_value, kind_of, same_value


class Expr:
    __slots__ = ()


@node
class Lit(Expr):
    value: Any
    kind: str = ""

    def __post_init__(self):
        if not self.kind:
            object.__setattr__(self, "kind", kind_of(self.value))


@node
class Var(Expr):
    name: str
    span: Any = span_field()


@node
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    span: Any = span_field()


@node
class UnOp(Expr):
    op: str
    operand: Expr
    span: Any = span_field()


@node
class Func(Expr):
    name: str
    args: tuple
    span: Any = span_field()


@node
class MsgLit(Expr):
    tag: str
    args: tuple
    span: Any = span_field()


@node
class SetLit(Expr):
    items: tuple
    span: Any = span_field()


ARITH = {"+", "-", "*", "div", "mod"}
COMPARE = {"=", "!=", "<", "<=", ">", ">="}
BOOL_OPS = {"and", "or"}
FUNCTIONS = {"max": 2, "min": 2, "abs": 1, "int": 1}


def free_vars(e: Expr) -> frozenset:
    try:
        return object.__getattribute__(e, "_fv")
    except AttributeError:
        pass
    if isinstance(e, Var):
        fv = frozenset((e.name,))
    elif isinstance(e, Lit):
        fv = frozenset()
    elif isinstance(e, BinOp):
        fv = free_vars(e.left) | free_vars(e.right)
    elif isinstance(e, UnOp):
        fv = free_vars(e.operand)
    elif isinstance(e, (Func, MsgLit)):
        fv = frozenset().union(*(free_vars(a) for a in e.args))
    elif isinstance(e, SetLit):
        fv = frozenset().union(*(free_vars(a) for a in e.items))
    else:
        raise TypeError(f"not an expression: {e!r}")
    object.__setattr__(e, "_fv", fv)
    return fv


def _int(v, what):
    if type(v) is not int:
        raise SortError(f"{what} expects Int, got {format_value(v)}")
    return v


def _bool(v, what):
    if type(v) is not bool:
        raise SortError(f"{what} expects Bool, got {format_value(v)}")
    return v


def eval_expr(e: Expr, bindings: Mapping[str, Value]) -> Value:
    """Evaluate ``e`` under ``bindings`` (which should include ``N`` when used).

    ``mod`` follows the mathematical convention: ``x mod m`` lies in ``[0, m)``.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        try:
            v = bindings[e.name]
        except KeyError:
            raise UnboundVariable(f"unbound variable {e.name!r}", getattr(e, "span", None)) from None
        return eval_expr(v, bindings) if isinstance(v, Expr) else v
    if isinstance(e, BinOp):
        op = e.op
        if op == "and":
            return _bool(eval_expr(e.left, bindings), op) and _bool(eval_expr(e.right, bindings), op)
        if op == "or":
            return _bool(eval_expr(e.left, bindings), op) or _bool(eval_expr(e.right, bindings), op)
        a = eval_expr(e.left, bindings)
        b = eval_expr(e.right, bindings)
        if op in ARITH:
            a, b = _int(a, op), _int(b, op)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if b == 0:
                raise SortError(f"{op} by zero", e.span)
            return a // b if op == "div" else a % b
        if op in ("=", "!="):
            if kind_of(a) != kind_of(b):
                raise SortError(f"cannot compare {format_value(a)} with {format_value(b)}", e.span)
            return same_value(a, b) == (op == "=")
        if op in COMPARE:
            a, b = _int(a, op), _int(b, op)
            return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
        if op == "in":
            if not isinstance(b, frozenset):
                raise SortError("'in' expects a set on the right", e.span)
            return a in b
        if op == "\\":
            if not (isinstance(a, frozenset) and isinstance(b, frozenset)):
                raise SortError("set difference expects sets", e.span)
            return a - b
        raise SortError(f"unknown operator {op!r}", e.span)
    if isinstance(e, UnOp):
        v = eval_expr(e.operand, bindings)
        if e.op == "-":
            return -_int(v, "unary -")
        if e.op == "not":
            return not _bool(v, "not")
        raise SortError(f"unknown operator {e.op!r}", e.span)
    if isinstance(e, Func):
        args = [eval_expr(a, bindings) for a in e.args]
        if FUNCTIONS.get(e.name) != len(args):
            raise SortError(f"bad call {e.name}/{len(args)}", e.span)
        if e.name == "max":
            return max(_int(args[0], "max"), _int(args[1], "max"))
        if e.name == "min":
            return min(_int(args[0], "min"), _int(args[1], "min"))
        if e.name == "abs":
            return abs(_int(args[0], "abs"))
        return _int(args[0], "int")
    if isinstance(e, MsgLit):
        return Msg(e.tag, tuple(eval_expr(a, bindings) for a in e.args))
    if isinstance(e, SetLit):
        return frozenset(eval_expr(a, bindings) for a in e.items)
    raise TypeError(f"not an expression: {e!r}")


def subst_expr(e: Expr, bindings: Mapping[str, Any]) -> Expr:
    """Replace variables by values (or expressions) and fold closed subterms."""
    if not (free_vars(e) & bindings.keys()):
        return e
    if isinstance(e, Var):
        v = bindings[e.name]
        return v if isinstance(v, Expr) else Lit(v)
    if isinstance(e, BinOp):
        out = BinOp(e.op, subst_expr(e.left, bindings), subst_expr(e.right, bindings), e.span)
    elif isinstance(e, UnOp):
        out = UnOp(e.op, subst_expr(e.operand, bindings), e.span)
    elif isinstance(e, Func):
        out = Func(e.name, tuple(subst_expr(a, bindings) for a in e.args), e.span)
    elif isinstance(e, MsgLit):
        out = MsgLit(e.tag, tuple(subst_expr(a, bindings) for a in e.args), e.span)
    elif isinstance(e, SetLit):
        out = SetLit(tuple(subst_expr(a, bindings) for a in e.items), e.span)
    else:
        return e
    return fold(out)


def fold(e: Expr) -> Expr:
    """Collapse a closed expression to a literal; leave it alone if it cannot be evaluated."""
    if isinstance(e, Lit) or free_vars(e):
        return e
    try:
        return Lit(eval_expr(e, {}))
    except SortError:
        return e


_PREC = {"or": 1, "and": 2, "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4, "in": 4,
         "+": 5, "-": 5, "\\": 5, "*": 6, "div": 6, "mod": 6}


def format_expr(e: Expr, prec: int = 0) -> str:
    """Concrete syntax for ``e``; parenthesises only where precedence demands."""
    if isinstance(e, Lit):
        s = format_value(e.value)
        return f"({s})" if s.startswith("-") and prec >= 7 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # comparisons do not chain; left-assoc elsewhere
        rp = p + 1
        lp = p + 1 if p == 4 else p
        s = f"{format_expr(e.left, lp)} {e.op} {format_expr(e.right, rp)}"
        return f"({s})" if p < prec else s
    if isinstance(e, UnOp):
        if e.op == "not":
            s = f"not {format_expr(e.operand, 3)}"
            return f"({s})" if prec > 3 else s
        s = f"-{format_expr(e.operand, 7)}"
        return f"({s})" if prec > 7 else s
    if isinstance(e, Func):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, MsgLit):
        return f"{e.tag}<{', '.join(format_expr(a, 5) for a in e.args)}>"
    if isinstance(e, SetLit):
        return "{" + ", ".join(format_expr(a) for a in e.items) + "}"
    raise TypeError(f"not an expression: {e!r}")
