"""Independent reference implementations used by the tests.

``naive_composed`` enumerates global steps by expanding every Sum eagerly
and pairing concrete actions by brute force, without the symbolic offers
and partner-driven matching the package uses. ``ElectionFuture`` is a
hand-written automaton for one rank of the election future, used to decide
which trace events are enabled.
"""

from __future__ import annotations

import random
from itertools import product

from mpifutures.algebra import (
    EPS, Act, Action, Call, Choice, Cond, CondElse, Epsilon, Lit, Par, Seq, SortRef, Sum, Tau,
    Var, eval_expr, par, seq, substitute,
)
from mpifutures.algebra.expr import BinOp
from mpifutures.algebra.values import same_value
from mpifutures.network import BARRIER_EMPTY, BarrierState, BcastState, ChannelTable, handling


# ---------------------------------------------------------------- eager local semantics

def guard_value(g, env):
    v = eval_expr(g, env.base)
    assert type(v) is bool
    return v


def done(t, env, depth=0):
    if isinstance(t, Epsilon):
        return True
    if isinstance(t, (Act, Tau)):
        return False
    if isinstance(t, (Seq, Par)):
        return done(t.left, env, depth) and done(t.right, env, depth)
    if isinstance(t, Choice):
        return done(t.left, env, depth) or done(t.right, env, depth)
    if isinstance(t, Cond):
        return guard_value(t.guard, env) and done(t.then, env, depth)
    if isinstance(t, CondElse):
        return done(t.then if guard_value(t.guard, env) else t.orelse, env, depth)
    if isinstance(t, Sum):
        return any(done(substitute(t.body, {t.var: d}), env, depth) for d in env.domain(t.sort))
    if isinstance(t, Call):
        return done(expand_call(t, env), env, depth + 1)
    raise TypeError(t)


def expand_call(c, env):
    d = env.definition(c.name)
    vals = {"N": env.n}
    for (p, _), a in zip(d.params, c.args):
        vals[p] = eval_expr(a, env.base)
    return substitute(d.body, vals)


def eager_steps(t, env):
    """Set of ``(Action, successor)`` by the textbook rules."""
    if isinstance(t, Act):
        return {(Action(t.name, tuple(eval_expr(a, env.base) for a in t.args)), EPS)}
    if isinstance(t, Tau):
        return {(Action("tau"), EPS)}
    if isinstance(t, Epsilon):
        return set()
    if isinstance(t, Seq):
        out = {(a, seq(l2, t.right)) for a, l2 in eager_steps(t.left, env)}
        if done(t.left, env):
            out |= eager_steps(t.right, env)
        return out
    if isinstance(t, Choice):
        return eager_steps(t.left, env) | eager_steps(t.right, env)
    if isinstance(t, Par):
        return ({(a, par(l2, t.right)) for a, l2 in eager_steps(t.left, env)}
                | {(a, par(t.left, r2)) for a, r2 in eager_steps(t.right, env)})
    if isinstance(t, Cond):
        return eager_steps(t.then, env) if guard_value(t.guard, env) else set()
    if isinstance(t, CondElse):
        return eager_steps(t.then if guard_value(t.guard, env) else t.orelse, env)
    if isinstance(t, Sum):
        out = set()
        for d in env.domain(t.sort):
            out |= eager_steps(substitute(t.body, {t.var: d}), env)
        return out
    if isinstance(t, Call):
        return eager_steps(expand_call(t, env), env)
    raise TypeError(t)


def expand_sums(t, env):
    """Instantiate top-level Sum binders: the lazy semantics defers these."""
    if isinstance(t, Sum):
        out = set()
        for d in env.domain(t.sort):
            out |= expand_sums(substitute(t.body, {t.var: d}), env)
        return out
    return {t}


# ---------------------------------------------------------------- builtins, by brute force

def builtin_moves(kind, state, n):
    """``(Action, new_state)`` pairs; ``None`` in an argument means "anything"."""
    if kind == "network":
        out = [(Action("nrecv", (None, None, None)), "enqueue")]
        for (i, j), msgs in state.queues:
            out.append((Action("nsend", (j, i, msgs[0])), ("dequeue", i, j)))
        return out
    if kind == "bcast":
        if state.src is None:
            return [(Action("breq", (None, None)), "start")]
        return [(Action("nsend", (j, state.src, state.msg)), ("serve", j)) for j in sorted(state.remaining)]
    if len(state.arrived) == n:
        return [(Action("tau"), "release")]
    return [(Action("barrier-ack", (i,)), ("arrive", i)) for i in range(n) if i not in state.arrived]


def apply_builtin(kind, state, move, concrete, n):
    if move == "enqueue":
        i, j, m = concrete
        if not (type(i) is int and type(j) is int and 0 <= i < n and 0 <= j < n):
            return None
        return state.enqueue(i, j, m)
    if move == "start":
        i, m = concrete
        if not (type(i) is int and 0 <= i < n):
            return None
        return handling(i, m, set(range(n)) - {i})
    if move == "release":
        return BARRIER_EMPTY
    tag = move[0]
    if tag == "dequeue":
        return state.dequeue(move[1], move[2])[1]
    if tag == "serve":
        return handling(state.src, state.msg, state.remaining - {move[1]})
    if tag == "arrive":
        return BarrierState(state.arrived | {move[1]})
    raise ValueError(move)


def naive_composed(locals_, builtins, env):
    """Set of ``(label text, locals, network, bcast, barrier)`` successors."""
    network, bcast, barrier = builtins
    n = len(locals_)
    states = {"network": network, "bcast": bcast, "barrier": barrier}
    held = barrier.arrived
    rank_steps = {r: (set() if r in held else eager_steps(locals_[r], env)) for r in range(n)}
    out = set()

    def result(label, new_locals, **upd):
        st = dict(states, **upd)
        out.add((label, tuple(new_locals), st["network"], st["bcast"], st["barrier"]))

    for kind, state in states.items():
        for act, move in builtin_moves(kind, state, n):
            if act.name == "tau":
                result("tau", locals_, **{kind: apply_builtin(kind, state, move, (), n)})

    lone = {a for a in env.allow if "|" not in a}
    for r in range(n):
        for a, t2 in rank_steps[r]:
            new_locals = list(locals_)
            new_locals[r] = t2
            if a.name == "tau":
                result("tau", new_locals)
            elif a.name in lone:
                result(str(a), new_locals)
            for pair in env.comm.pairs:
                if pair.label not in env.allow:
                    continue
                for side in (0, 1):
                    if (pair.a, pair.b)[side] != a.name:
                        continue
                    other = (pair.b, pair.a)[side]
                    # partner is a builtin
                    for kind, state in states.items():
                        for b, move in builtin_moves(kind, state, n):
                            if b.name != other:
                                continue
                            concrete = _agree(pair, side, a, b)
                            if concrete is None:
                                continue
                            new_state = apply_builtin(kind, state, move, concrete, n)
                            if new_state is None:
                                continue
                            b2 = Action(other, concrete)
                            parts = (a, b2) if side == 0 else (b2, a)
                            result("|".join(map(str, parts)), new_locals, **{kind: new_state})
                    # partner is another rank
                    if side != 0:
                        continue
                    for r2 in range(n):
                        if r2 == r:
                            continue
                        for b, u2 in rank_steps[r2]:
                            if b.name != other or _agree(pair, 0, a, b) is None:
                                continue
                            both = list(new_locals)
                            both[r2] = u2
                            result(f"{a}|{b}", both)
    return normalise(out, env)


def _agree(pair, side, a, b):
    """Concrete args for partner ``b`` given rank action ``a``, or None if the data disagree."""
    args = list(b.args)
    for m in pair.mapping:
        mine, theirs = m[side], m[1 - side]
        if mine >= len(a.args) or theirs >= len(args):
            return None
        if args[theirs] is None:
            args[theirs] = a.args[mine]
        elif not same_value(args[theirs], a.args[mine]):
            return None
    if any(x is None for x in args):
        return None
    return tuple(args)


def normalise(successors, env):
    """Instantiate top-level Sums in every local so both semantics compare equal."""
    out = set()
    for label, locals_, *builtins in successors:
        for locs in product(*(sorted(expand_sums(t, env), key=repr) for t in locals_)):
            out.add((label, tuple(locs), *builtins))
    return out


def lazy_expanded(steps, env):
    """Package steps in the oracle's comparison form."""
    return normalise({(str(st.label), st.locals, st.network, st.bcast, st.barrier) for st in steps}, env)


# ---------------------------------------------------------------- random systems

BIT = SortRef("Int", 0, 1)


class TermGen:
    """Random closed terms over a small alphabet, depth-bounded."""

    def __init__(self, rng: random.Random, n: int):
        self.rng = rng
        self.n = n
        self.fresh = 0

    def expr(self, scope):
        if scope and self.rng.random() < 0.5:
            return Var(self.rng.choice(scope))
        return Lit(self.rng.randint(0, 1))

    def rank(self):
        return Lit(self.rng.randrange(self.n))

    def action(self, scope, me):
        k = self.rng.randrange(8)
        if k == 0:
            return Act("send", (Lit(me), self.rank(), self.expr(scope)))
        if k == 1:
            return Act("recv", (Lit(me), self.rank(), self.expr(scope)))
        if k == 2:
            return Act("isend", (Lit(me), self.rank(), self.expr(scope), Lit(self.rng.randint(0, 1))))
        if k == 3:
            return Act("bcast", (Lit(me), self.expr(scope)))
        if k == 4:
            return Act("barrier", (Lit(me),))
        if k == 5:
            return Act("a", (self.expr(scope),))
        if k == 6:
            return Act("c", (self.expr(scope),))
        return Act("d", (self.expr(scope),))

    def term(self, depth, scope=(), me=0):
        rng = self.rng
        if depth <= 1:
            k = rng.randrange(10)
            if k == 0:
                return EPS
            if k == 1:
                return Tau()
            return self.action(scope, me)
        k = rng.randrange(8)
        sub = lambda: self.term(depth - 1, scope, me)
        if k == 0:
            return Seq(sub(), sub())
        if k == 1:
            return Choice(sub(), sub())
        if k == 2:
            return Par(sub(), sub())
        if k == 3:
            return Cond(BinOp("=", self.expr(scope), Lit(rng.randint(0, 1))), sub())
        if k == 4:
            return CondElse(BinOp("<", self.expr(scope), Lit(1)), sub(), sub())
        if k == 5:
            return Call("Loop", (self.expr(scope),))
        if k == 6:
            var = f"x{self.fresh}"
            self.fresh += 1
            return Sum(var, BIT, self.term(depth - 1, scope + (var,), me))
        return self.action(scope, me)

    def channels(self):
        t = ChannelTable(self.n)
        for _ in range(self.rng.randrange(3)):
            t = t.enqueue(self.rng.randrange(self.n), self.rng.randrange(self.n), self.rng.randint(0, 1))
        return t

    def bcast(self):
        if self.n < 2 or self.rng.random() < 0.6:
            return BcastState()
        src = self.rng.randrange(self.n)
        others = [j for j in range(self.n) if j != src]
        return handling(src, self.rng.randint(0, 1), set(others[: self.rng.randint(1, len(others))]))

    def barrier(self):
        if self.rng.random() < 0.6:
            return BARRIER_EMPTY
        return BarrierState(frozenset(r for r in range(self.n) if self.rng.random() < 0.5))


def random_environment(n):
    from mpifutures.algebra import CommPair, CommSpec, DEFAULT_ALLOW, DEFAULT_PAIRS, Environment, ProcessDef

    # Loop(x) = a(x) . Loop((x + 1) mod 2) + tau
    x = Var("x")
    loop = ProcessDef("Loop", (("x", BIT),), Choice(
        Seq(Act("a", (x,)), Call("Loop", (BinOp("mod", BinOp("+", x, Lit(1)), Lit(2)),))), Tau()))
    return Environment(
        n=n,
        defs={"Loop": loop},
        int_range=(0, 1),
        comm=CommSpec(DEFAULT_PAIRS + (CommPair("c", "d", ((0, 0),)),)),
        allow=DEFAULT_ALLOW | {"a", "c|d"},
    )


def random_system(rng: random.Random, max_depth=4, max_ranks=3):
    n = rng.randint(1, max_ranks)
    gen = TermGen(rng, n)
    locals_ = tuple(gen.term(rng.randint(1, max_depth), me=r) for r in range(n))
    return locals_, (gen.channels(), gen.bcast(), gen.barrier()), random_environment(n)


# ---------------------------------------------------------------- election future automaton

class ElectionFuture:
    """One rank of the election future, written out as explicit control states.

    ``enabled(prefix)`` returns a predicate over ``(op, args)`` telling
    whether an event is allowed after the given prefix of events, or None
    if the prefix itself already left the future.
    """

    def __init__(self, rank, value, n, int_range=(0, 15)):
        self.rank, self.value, self.n = rank, value, n
        self.ints = range(int_range[0], int_range[1] + 1)

    def _walk(self, prefix):
        n = self.n
        h, rnd, phase = self.value, 0, "send"
        for op, args in prefix:
            allowed = self._allowed(h, rnd, phase)
            if allowed is None or not allowed(op, args):
                return None
            if phase == "send":
                phase = "recv"
            elif phase == "recv":
                h = max(h, args[1].payload[0])
                rnd += 1
                phase = "send" if rnd < n else "choose"
            elif phase == "choose":
                phase = "barrier"
            elif phase == "barrier":
                phase = "done"
        return h, rnd, phase

    def _allowed(self, h, rnd, phase):
        i, n = self.rank, self.n

        def is_msg(m, tag):
            return hasattr(m, "tag") and m.tag == tag and len(m.payload) == 1

        if phase == "send":
            return lambda op, a: (op == "send" and a[0] == (i + 1) % n and is_msg(a[1], "elect")
                                  and a[1].payload[0] == h)
        if phase == "recv":
            return lambda op, a: (op == "recv" and a[0] == (i - 1) % n and is_msg(a[1], "elect")
                                  and type(a[1].payload[0]) is int and a[1].payload[0] in self.ints)
        if phase == "choose":
            if h == self.value:
                return lambda op, a: op == "bcast" and is_msg(a[0], "lead") and a[0].payload[0] == i
            return lambda op, a: (op == "recv" and type(a[0]) is int and 0 <= a[0] < n
                                  and is_msg(a[1], "lead") and a[1].payload[0] == a[0])
        if phase == "barrier":
            return lambda op, a: op == "barrier"
        return lambda op, a: False

    def enabled(self, prefix):
        state = self._walk(prefix)
        if state is None:
            return None
        return self._allowed(*state)


# ---------------------------------------------------------------- permission trees

def random_par_tree(rng: random.Random, leaves: int):
    """A random Par tree over ``leaves`` distinct zero-argument calls."""
    parts = [Call(f"F{k}", ()) for k in range(leaves)]
    while len(parts) > 1:
        k = rng.randrange(len(parts) - 1)
        parts[k:k + 2] = [Par(parts[k], parts[k + 1])]
    return parts[0]


def split_and_merge(rng: random.Random, f, split, merge, leaves_out):
    """Recursively split ``f`` at random ratios, then merge back; returns the rebuilt assertion."""
    from fractions import Fraction

    if not isinstance(f.term, Par) or rng.random() < 0.2:
        leaves_out.append(f)
        return f
    ratio = Fraction(rng.randint(1, 99), 100)
    a, b = split(f, ratio)
    return merge(split_and_merge(rng, a, split, merge, leaves_out),
                 split_and_merge(rng, b, split, merge, leaves_out))
