"""Immutable model values and their canonical JSON encoding.

Model values are plain Python immutables: ``int``, ``bool``, ``str``
(symbols), ``None``, ``tuple`` (sequences, pairs, messages), ``frozenset``
and :class:`Record`.  Equality and hashing are structural.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from typing import Any


class Record(Mapping):
    """Immutable name -> value map."""

    __slots__ = ("_items", "_hash")

    def __init__(self, items=(), **kw):
        d = dict(items, **kw)
        self._items = tuple(sorted(d.items()))
        self._hash = hash(("Record", self._items))

    def __getitem__(self, key):
        for k, v in self._items:
            if k == key:
                return v
        raise KeyError(key)

    def __iter__(self):
        return (k for k, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Record):
            return self._items == other._items
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self._items)
        return f"Record({inner})"

    def set(self, **kw) -> "Record":
        d = dict(self._items)
        d.update(kw)
        return Record(d)


def freeze(obj: Any) -> Any:
    """Convert lists/dicts/sets recursively into model values."""
    if isinstance(obj, (list, tuple)):
        return tuple(freeze(x) for x in obj)
    if isinstance(obj, (set, frozenset)):
        return frozenset(freeze(x) for x in obj)
    if isinstance(obj, Record):
        return obj
    if isinstance(obj, dict):
        return Record({k: freeze(v) for k, v in obj.items()})
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    raise TypeError(f"not a model value: {obj!r}")


def to_json(v: Any) -> Any:
    """Encode a model value as a JSON-compatible object (canonical)."""
    if v is None or isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, tuple):
        return [to_json(x) for x in v]
    if isinstance(v, frozenset):
        items = [to_json(x) for x in v]
        items.sort(key=lambda x: json.dumps(x, sort_keys=True, separators=(",", ":")))
        return {"set": items}
    if isinstance(v, Record):
        return {"rec": {k: to_json(x) for k, x in v.items()}}
    raise TypeError(f"not a model value: {v!r}")


def from_json(obj: Any) -> Any:
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, list):
        return tuple(from_json(x) for x in obj)
    if isinstance(obj, dict):
        if set(obj) == {"set"}:
            return frozenset(from_json(x) for x in obj["set"])
        if set(obj) == {"rec"}:
            return Record({k: from_json(x) for k, x in obj["rec"].items()})
    raise ValueError(f"cannot decode model value: {obj!r}")


def dumps(obj: Any) -> str:
    """Canonical compact JSON text for an already JSON-encoded object."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
