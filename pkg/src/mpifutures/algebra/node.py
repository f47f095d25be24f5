"""Immutable AST node base with cached structural hashing.

Terms are hashed every time a configuration is looked up in the state
table, so recomputing a deep hash on each lookup dominates exploration
time. Nodes cache their hash on first use; source spans never take part
in equality.
"""

from dataclasses import dataclass, field, fields


def span_field():
    return field(default=None, compare=False, repr=False)


def _hash(self):
    try:
        return object.__getattribute__(self, "_h")
    except AttributeError:
        h = hash((type(self).__name__,) + tuple(getattr(self, n) for n in self._keys))
        object.__setattr__(self, "_h", h)
        return h


def _eq(self, other):
    if self is other:
        return True
    if type(other) is not type(self) or hash(self) != hash(other):
        return False
    return all(getattr(self, n) == getattr(other, n) for n in self._keys)


def node(cls):
    """Class decorator: frozen dataclass with cached hash and fast equality."""
    cls = dataclass(frozen=True, eq=False)(cls)
    cls._keys = tuple(f.name for f in fields(cls) if f.compare)
    cls.__hash__ = _hash
    cls.__eq__ = _eq
    return cls
