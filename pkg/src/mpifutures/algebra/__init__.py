"""Future algebra: values, expressions, process terms and their semantics."""

from .compose import Step, composed_steps
from .env import (
    DEFAULT_ALLOW, DEFAULT_PAIRS, NETWORK_ACTIONS, TAU_LABEL, Action, CommPair, CommSpec,
    Environment, MultiActionLabel, ProcessDef,
)
from .expr import BinOp, Expr, Func, Lit, MsgLit, SetLit, UnOp, Var, eval_expr, format_expr
from .steps import Offer, can_finish, instantiate, local_steps, offers, terminates, unfold
from .terms import (
    EPS, TAU, Act, Call, Choice, Cond, CondElse, Epsilon, Par, Seq, SortRef, Sum, Tau, Term,
    act, call, close, format_term, free_vars, par, seq, substitute,
)
from .values import Msg, Value, format_value, same_value

__all__ = [
    "Act", "Action", "BinOp", "Call", "Choice", "CommPair", "CommSpec", "Cond", "CondElse",
    "DEFAULT_ALLOW", "DEFAULT_PAIRS", "EPS", "Environment", "Epsilon", "Expr", "Func", "Lit",
    "Msg", "MsgLit", "MultiActionLabel", "NETWORK_ACTIONS", "Offer", "Par", "ProcessDef", "Seq",
    "SetLit", "SortRef", "Step", "Sum", "TAU", "TAU_LABEL", "Tau", "Term", "UnOp", "Value", "Var",
    "act", "call", "can_finish", "close", "composed_steps", "eval_expr", "format_expr",
    "format_term", "format_value", "free_vars", "instantiate", "local_steps", "offers", "par",
    "same_value", "seq", "substitute", "terminates", "unfold",
]
