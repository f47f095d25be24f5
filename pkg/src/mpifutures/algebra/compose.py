"""Parallel composition of rank futures with the built-in network processes."""

from __future__ import annotations

from dataclasses import dataclass

from ..network import ANY, BarrierState, BcastState, ChannelTable, barrier_steps, bcast_steps, network_steps
from .env import TAU_LABEL, Action, Environment, MultiActionLabel
from .steps import instantiate, offers

BUILTINS = ("network", "bcast", "barrier")


@dataclass(frozen=True)
class Step:
    """One global transition.

    ``participants`` names the components involved (rank numbers or builtin
    names); ``rank_actions`` lists ``(rank, Action)`` for the rank-side parts.
    """

    label: MultiActionLabel
    locals: tuple
    network: ChannelTable
    bcast: BcastState
    barrier: BarrierState
    participants: tuple
    rank_actions: tuple

    @property
    def builtins(self):
        return (self.network, self.bcast, self.barrier)


def _label(pair, rank_side, rank_action, other_action):
    if rank_side == 0:
        parts = (rank_action, other_action)
    else:
        parts = (other_action, rank_action)
    return MultiActionLabel(pair.label, parts)


def composed_steps(locals_, builtins, env: Environment) -> list:
    """All global transitions of ``locals_ || Network || Bcast || Barrier``.

    ``builtins`` is ``(ChannelTable, BcastState, BarrierState)``. Ranks that
    have arrived at the barrier are held: they take no steps until release.
    Network-facing actions never fire alone; they need a partner from a
    communication pair whose label is allowed.
    """
    network, bcast, barrier = builtins
    n = len(locals_)
    held = barrier.arrived
    states = {"network": network, "bcast": bcast, "barrier": barrier}
    builtin_offers = {
        "network": network_steps(network),
        "bcast": bcast_steps(bcast, n),
        "barrier": barrier_steps(barrier, n),
    }
    rank_offers = [() if r in held else offers(locals_[r], env) for r in range(n)]
    lone = env.lone_allowed
    out = []
    seen = set()

    def emit(label, new_locals, updates, participants, rank_actions):
        st = dict(states)
        st.update(updates)
        step = Step(label, new_locals, st["network"], st["bcast"], st["barrier"],
                    tuple(participants), tuple(rank_actions))
        key = (label, new_locals, step.builtins)
        if key not in seen:
            seen.add(key)
            out.append(step)

    for comp in BUILTINS:
        for bo in builtin_offers[comp]:
            if bo.name == "tau":
                emit(TAU_LABEL, tuple(locals_), {comp: bo.apply(())}, (comp,), ())

    for r in range(n):
        for o in rank_offers[r]:
            if o.name == "tau" or o.name in lone:
                for a, cont in instantiate(o, env):
                    label = TAU_LABEL if o.name == "tau" else MultiActionLabel(o.name, (a,))
                    emit(label, _replace(locals_, r, cont), {}, (r,), ((r, a),))
            for pair in env.comm.pairs_for(o.name):
                if pair.label not in env.allow:
                    continue
                for side in (0, 1):
                    if (pair.a, pair.b)[side] != o.name:
                        continue
                    partner = (pair.b, pair.a)[side]
                    mapping = [(m[side], m[1 - side]) for m in pair.mapping]
                    _with_builtins(o, r, side, pair, partner, mapping, builtin_offers, locals_, env, emit)
                    if side == 0:
                        _with_ranks(o, r, pair, partner, mapping, rank_offers, locals_, env, emit)
    return out


def _with_builtins(o, r, side, pair, partner, mapping, builtin_offers, locals_, env, emit):
    for comp in BUILTINS:
        for bo in builtin_offers[comp]:
            if bo.name != partner:
                continue
            fixed = {}
            for mine, theirs in mapping:
                if theirs < len(bo.args) and bo.args[theirs] is not ANY:
                    fixed[mine] = bo.args[theirs]
            for a, cont in instantiate(o, env, fixed):
                bargs = list(bo.args)
                for mine, theirs in mapping:
                    if theirs < len(bargs) and mine < len(a.args) and bargs[theirs] is ANY:
                        bargs[theirs] = a.args[mine]
                if ANY in bargs or len(a.args) < len(mapping):
                    continue
                new_state = bo.apply(tuple(bargs))
                if new_state is None:
                    continue
                label = _label(pair, side, a, Action(partner, tuple(bargs)))
                emit(label, _replace(locals_, r, cont), {comp: new_state}, (r, comp), ((r, a),))


def _with_ranks(o, r, pair, partner, mapping, rank_offers, locals_, env, emit):
    n = len(locals_)
    for r2 in range(n):
        if r2 == r or (pair.a == pair.b and r2 < r):
            continue
        partners = [o2 for o2 in rank_offers[r2] if o2.name == partner]
        if not partners:
            continue
        for a, cont in instantiate(o, env):
            if len(a.args) < len(mapping):
                continue
            for o2 in partners:
                fixed = {theirs: a.args[mine] for mine, theirs in mapping}
                for a2, cont2 in instantiate(o2, env, fixed):
                    new_locals = _replace(_replace(locals_, r, cont), r2, cont2)
                    emit(MultiActionLabel(pair.label, (a, a2)), new_locals, {}, (r, r2),
                         ((r, a), (r2, a2)))


def _replace(t, i, v):
    return t[:i] + (v,) + t[i + 1:]
