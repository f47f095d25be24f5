"""Single-process operational semantics.

Steps are computed symbolically first: an :class:`Offer` describes a family
of transitions ``name(args)`` parameterised by the Sum binders in scope. A
binder is instantiated only when it occurs in the arguments or a guard, and
then preferably by matching against a partner's concrete data. Binders that
only occur in the continuation are re-wrapped as a Sum around it, i.e.
``sum d . a . P(d)`` steps by ``a`` to ``sum d . P(d)``. That preserves the
trace set of eager expansion without committing to ``d`` before the data
that determines it is seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

from ..errors import SortError, UnguardedRecursion
from .env import Action, Environment
from .expr import Expr, MsgLit, UnOp, Var, eval_expr, free_vars as efv
from .terms import (
    EPS, Act, Call, Choice, Cond, CondElse, Epsilon, Par, Seq, Sum, Tau, Term,
    eval_guard, free_vars, par, seq, substitute,
)
from .values import Msg, same_value

MAX_UNFOLD = 64


@dataclass(frozen=True)
class TermGuard:
    """Side condition "``term`` can terminate", used when ``term`` mentions a binder."""

    term: Term


@dataclass(frozen=True)
class Offer:
    name: str
    args: tuple
    binders: tuple  # ((var, SortRef), ...), outermost first
    guards: tuple
    cont: Term

    def then(self, cont):
        return Offer(self.name, self.args, self.binders, self.guards, cont)


def _guard_vars(g):
    return free_vars(g.term) if isinstance(g, TermGuard) else efv(g)


def offers(t: Term, env: Environment) -> tuple:
    """Symbolic steps of a closed term; cached per environment."""
    cache = env.offer_cache
    try:
        return cache[t]
    except KeyError:
        pass
    out = tuple(_offers(t, env, (), 0))
    cache[t] = out
    return out


def _offers(t, env, ctx, depth):
    if depth > MAX_UNFOLD:
        raise UnguardedRecursion("process unfolds without performing an action")
    ctx_names = {b[0] for b in ctx}
    if isinstance(t, Act):
        return [Offer(t.name, t.args, ctx, (), EPS)]
    if isinstance(t, Tau):
        return [Offer("tau", (), ctx, (), EPS)]
    if isinstance(t, Epsilon):
        return []
    if isinstance(t, Seq):
        out = [o.then(seq(o.cont, t.right)) for o in _offers(t.left, env, ctx, depth)]
        if free_vars(t.left) & ctx_names:
            if not _may_terminate(t.left, env):
                return out
            guard = TermGuard(t.left)
            out += [Offer(o.name, o.args, o.binders, (guard,) + o.guards, o.cont)
                    for o in _offers(t.right, env, ctx, depth)]
        elif terminates(t.left, env):
            out += _offers(t.right, env, ctx, depth)
        return out
    if isinstance(t, Choice):
        return _offers(t.left, env, ctx, depth) + _offers(t.right, env, ctx, depth)
    if isinstance(t, Par):
        left = [o.then(par(o.cont, t.right)) for o in _offers(t.left, env, ctx, depth)]
        right = [o.then(par(t.left, o.cont)) for o in _offers(t.right, env, ctx, depth)]
        return left + right
    if isinstance(t, Cond):
        if efv(t.guard) & ctx_names:
            return [Offer(o.name, o.args, o.binders, (t.guard,) + o.guards, o.cont)
                    for o in _offers(t.then, env, ctx, depth)]
        return _offers(t.then, env, ctx, depth) if eval_guard(t.guard, env.base) else []
    if isinstance(t, CondElse):
        if efv(t.guard) & ctx_names:
            neg = UnOp("not", t.guard)
            return (
                [Offer(o.name, o.args, o.binders, (t.guard,) + o.guards, o.cont)
                 for o in _offers(t.then, env, ctx, depth)]
                + [Offer(o.name, o.args, o.binders, (neg,) + o.guards, o.cont)
                   for o in _offers(t.orelse, env, ctx, depth)]
            )
        branch = t.then if eval_guard(t.guard, env.base) else t.orelse
        return _offers(branch, env, ctx, depth)
    if isinstance(t, Sum):
        env.domain(t.sort)  # fail early on unknown or infinite sorts
        fresh = f"{t.var.split('#')[0]}#{len(ctx)}"
        body = t.body if fresh == t.var else substitute(t.body, {t.var: Var(fresh)})
        return _offers(body, env, ctx + ((fresh, t.sort),), depth)
    if isinstance(t, Call):
        return _offers(unfold(t, env), env, ctx, depth + 1)
    raise TypeError(f"not a term: {t!r}")


def _may_terminate(t, env, depth=0):
    """Conservative static check used when termination depends on unbound data."""
    if isinstance(t, Epsilon):
        return True
    if isinstance(t, (Act, Tau)):
        return False
    if isinstance(t, (Seq, Par)):
        return _may_terminate(t.left, env, depth) and _may_terminate(t.right, env, depth)
    if isinstance(t, Choice):
        return _may_terminate(t.left, env, depth) or _may_terminate(t.right, env, depth)
    if isinstance(t, Cond):
        return _may_terminate(t.then, env, depth)
    if isinstance(t, CondElse):
        return _may_terminate(t.then, env, depth) or _may_terminate(t.orelse, env, depth)
    if isinstance(t, Sum):
        return _may_terminate(t.body, env, depth)
    if isinstance(t, Call) and depth < 8:
        return _may_terminate(env.definition(t.name).body, env, depth + 1)
    return True


def unfold(c: Call, env: Environment) -> Term:
    """Body of ``c`` with parameters replaced by the (possibly open) arguments."""
    d = env.definition(c.name)
    if len(d.params) != len(c.args):
        raise SortError(f"{c.name} expects {len(d.params)} argument(s), got {len(c.args)}", c.span)
    bindings = dict(env.base)
    for (p, _), a in zip(d.params, c.args):
        bindings[p] = eval_expr(a, env.base) if not efv(a) else a
    return substitute(d.body, bindings)


def _match(e: Expr, value, sigma, sorts, env):
    """Try to bind binders in ``e`` so that it evaluates to ``value``.

    Returns True/False, or None when the pattern is too complex to invert.
    """
    if isinstance(e, Var) and e.name in sorts:
        if e.name in sigma:
            return same_value(sigma[e.name], value)
        if not env.in_domain(sorts[e.name], value):
            return False
        sigma[e.name] = value
        return True
    if isinstance(e, MsgLit):
        if not isinstance(value, Msg) or value.tag != e.tag or len(value.payload) != len(e.args):
            return False
        result = True
        for sub, v in zip(e.args, value.payload):
            r = _match(sub, v, sigma, sorts, env)
            if r is False:
                return False
            if r is None:
                result = None
        return result
    if efv(e) - sigma.keys():
        return None
    return same_value(eval_expr(e, {**env.base, **sigma}), value)


def instantiate(o: Offer, env: Environment, fixed=None, eager=False) -> Iterator:
    """Concrete transitions of offer ``o``.

    ``fixed`` maps argument positions to the values a partner demands. With
    ``eager`` every binder is instantiated, including those only used in
    the continuation. Yields ``(Action, continuation)``.
    """
    if fixed and max(fixed) >= len(o.args):
        return
    sorts = dict(o.binders)
    sigma = {}
    deferred = []
    if fixed:
        for pos, value in fixed.items():
            r = _match(o.args[pos], value, sigma, sorts, env)
            if r is False:
                return
            if r is None:
                deferred.append((pos, value))
    need = set()
    for a in o.args:
        need |= efv(a)
    for g in o.guards:
        need |= _guard_vars(g)
    if eager:
        need |= free_vars(o.cont)
    order = [b for b in o.binders if b[0] in need and b[0] not in sigma]
    names = [b[0] for b in order]
    for combo in product(*(env.domain(s) for _, s in order)):
        full = {**env.base, **sigma, **dict(zip(names, combo))}
        if any(not same_value(eval_expr(o.args[p], full), v) for p, v in deferred):
            continue
        if not all(_check_guard(g, full, env) for g in o.guards):
            continue
        args = tuple(eval_expr(a, full) for a in o.args)
        yield Action(o.name, args), _rewrap(substitute(o.cont, full), o.binders)


def _check_guard(g, bindings, env):
    if isinstance(g, TermGuard):
        return terminates(substitute(g.term, bindings), env)
    return eval_guard(g, bindings)


def _rewrap(cont, binders):
    fv = free_vars(cont)
    for var, sort in reversed(binders):
        if var in fv:
            cont = Sum(var, sort, cont)
            fv = free_vars(cont)
    return cont


def local_steps(t: Term, env: Environment) -> list:
    """All single-process transitions with Sums fully expanded.

    Returns a duplicate-free list of ``(Action, successor)`` pairs.
    """
    out = []
    seen = set()
    for o in offers(t, env):
        for step in instantiate(o, env, eager=True):
            if step not in seen:
                seen.add(step)
                out.append(step)
    return out


def terminates(t: Term, env: Environment, depth: int = 0) -> bool:
    """Whether ``t`` can finish without performing any action."""
    key = ("term", t)
    cache = env.term_cache
    if key in cache:
        return cache[key]
    if depth > MAX_UNFOLD:
        raise UnguardedRecursion("process unfolds without performing an action")
    if isinstance(t, Epsilon):
        r = True
    elif isinstance(t, (Act, Tau)):
        r = False
    elif isinstance(t, (Seq, Par)):
        r = terminates(t.left, env, depth) and terminates(t.right, env, depth)
    elif isinstance(t, Choice):
        r = terminates(t.left, env, depth) or terminates(t.right, env, depth)
    elif isinstance(t, Cond):
        r = eval_guard(t.guard, env.base) and terminates(t.then, env, depth)
    elif isinstance(t, CondElse):
        r = terminates(t.then if eval_guard(t.guard, env.base) else t.orelse, env, depth)
    elif isinstance(t, Sum):
        r = any(terminates(substitute(t.body, {t.var: d}), env, depth) for d in env.domain(t.sort))
    elif isinstance(t, Call):
        r = terminates(unfold(t, env), env, depth + 1)
    else:
        raise TypeError(f"not a term: {t!r}")
    cache[key] = r
    return r


def can_finish(t: Term, env: Environment) -> bool:
    """Whether ``t`` reaches a terminating term using only silent steps."""
    seen = {t}
    todo = [t]
    while todo:
        cur = todo.pop()
        if terminates(cur, env):
            return True
        for o in offers(cur, env):
            if o.name != "tau":
                continue
            for _, nxt in instantiate(o, env):
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
    return False


def is_closed(t: Term) -> bool:
    return not free_vars(t)


