"""Line-delimited trace files shared by the checker, conformance and CLI.

Format::

    mgcheck-trace v1
    {"index": 0, "state": {...}}
    {"index": 1, "action": "Name", "bindings": {...}, "changed": {...}}
    ...
"""

from __future__ import annotations

import json
from pathlib import Path

from .kernel import ActionInstance, State, Trace
from .values import dumps, from_json, to_json

HEADER = "mgcheck-trace v1"


def dumps_trace(t: Trace) -> str:
    lines = [HEADER, dumps({"index": 0, "state": t.init.to_json()})]
    prev = t.init
    for k, (inst, s) in enumerate(t.steps, 1):
        changed = {n: to_json(s[n]) for n in s if s[n] != prev[n]}
        rec = {"index": k, "action": inst.name,
               "bindings": {p: to_json(v) for p, v in inst.bindings},
               "changed": changed}
        lines.append(dumps(rec))
        prev = s
    return "\n".join(lines) + "\n"


def loads_trace(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != HEADER:
        raise ValueError("missing trace header")
    first = json.loads(lines[1])
    if first.get("index") != 0:
        raise ValueError("first record must be the initial state")
    init = State.from_dict({k: from_json(v) for k, v in first["state"].items()})
    steps = []
    prev = init
    for k, ln in enumerate(lines[2:], 1):
        rec = json.loads(ln)
        if rec["index"] != k:
            raise ValueError(f"record {k} out of order")
        inst = ActionInstance(rec["action"], tuple(sorted((p, from_json(v)) for p, v in rec["bindings"].items())))
        s = prev.replace({n: from_json(v) for n, v in rec["changed"].items()})
        steps.append((inst, s))
        prev = s
    return Trace(init, tuple(steps))


def write_trace(path, t: Trace) -> None:
    Path(path).write_text(dumps_trace(t))


def read_trace(path) -> Trace:
    return loads_trace(Path(path).read_text())
