"""Data values carried by actions: ints, bools, finite sets and tagged messages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union


@dataclass(frozen=True)
class Msg:
    """A tagged message such as ``elect<5>`` or ``lead<0>``."""

    tag: str
    payload: tuple = ()

    def __str__(self):
        return f"{self.tag}<{', '.join(format_value(v) for v in self.payload)}>"


Value = Union[int, bool, frozenset, Msg]


def kind_of(v: Any) -> str:
    if type(v) is bool:
        return "Bool"
    if type(v) is int:
        return "Int"
    if isinstance(v, Msg):
        return "Msg"
    if isinstance(v, frozenset):
        return "Set"
    raise TypeError(f"not a model value: {v!r}")


def same_value(a: Any, b: Any) -> bool:
    """Equality that refuses to identify ``True`` with ``1``."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Msg):
        return (
            a.tag == b.tag
            and len(a.payload) == len(b.payload)
            and all(same_value(x, y) for x, y in zip(a.payload, b.payload))
        )
    return a == b


def _sort_key(v):
    k = kind_of(v)
    return (k, v if k == "Int" else 0, format_value(v))


def format_value(v: Any) -> str:
    if type(v) is bool:
        return "true" if v else "false"
    if type(v) is int:
        return str(v)
    if isinstance(v, Msg):
        return str(v)
    if isinstance(v, frozenset):
        return "{" + ", ".join(format_value(x) for x in sorted(v, key=_sort_key)) + "}"
    raise TypeError(f"not a model value: {v!r}")


def value_to_json(v: Any):
    if isinstance(v, Msg):
        return {"tag": v.tag, "payload": [value_to_json(x) for x in v.payload]}
    if isinstance(v, frozenset):
        return {"set": [value_to_json(x) for x in sorted(v, key=_sort_key)]}
    if type(v) in (int, bool):
        return v
    raise TypeError(f"not a model value: {v!r}")


def value_from_json(obj) -> Value:
    if isinstance(obj, dict):
        if "tag" in obj:
            return Msg(obj["tag"], tuple(value_from_json(x) for x in obj.get("payload", ())))
        if "set" in obj:
            return frozenset(value_from_json(x) for x in obj["set"])
    if type(obj) in (int, bool):
        return obj
    raise ValueError(f"cannot decode value from {obj!r}")
