"""Explicit-state exploration engine.

A :class:`System` is a set of guarded deterministic actions over a fixed
set of variables.  The kernel enumerates enabled action instances, applies
them, runs breadth-first invariant checking and seeded random walks, and
rebuilds counterexample traces from parent pointers.
"""

from __future__ import annotations

import itertools
import random
import time
from array import array
from collections.abc import Callable, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from .values import dumps, to_json


class KernelError(Exception):
    pass


class MalformedState(KernelError):
    pass


class GuardNotEnabled(KernelError):
    pass


class MetadataViolation(KernelError):
    """An action touched a variable outside its declared reads/writes."""


# ---------------------------------------------------------------------------
# states

class Schema:
    __slots__ = ("names", "index")
    _cache: dict[tuple[str, ...], "Schema"] = {}

    def __init__(self, names: tuple[str, ...]):
        self.names = names
        self.index = {n: k for k, n in enumerate(names)}

    @classmethod
    def of(cls, names: Iterable[str]) -> "Schema":
        key = tuple(sorted(names))
        sch = cls._cache.get(key)
        if sch is None:
            sch = cls._cache[key] = cls(key)
        return sch


class State(Mapping):
    """Total, immutable assignment of values to a fixed set of variables."""

    __slots__ = ("schema", "values", "_hash")

    def __init__(self, schema: Schema, values: tuple):
        self.schema = schema
        self.values = values
        self._hash = hash(values)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "State":
        sch = Schema.of(d)
        return cls(sch, tuple(d[n] for n in sch.names))

    def __getitem__(self, name: str):
        return self.values[self.schema.index[name]]

    def __iter__(self):
        return iter(self.schema.names)

    def __len__(self):
        return len(self.values)

    def __contains__(self, name):
        return name in self.schema.index

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, State):
            return (self._hash == other._hash and self.values == other.values
                    and self.schema.names == other.schema.names)
        return NotImplemented

    def __repr__(self):
        return "State(" + ", ".join(f"{n}={v!r}" for n, v in self.items()) + ")"

    def replace(self, changes: Mapping[str, Any]) -> "State":
        if not changes:
            return self
        vals = list(self.values)
        idx = self.schema.index
        for k, v in changes.items():
            try:
                vals[idx[k]] = v
            except KeyError:
                raise MalformedState(f"unknown variable {k!r}") from None
        return State(self.schema, tuple(vals))

    def to_json(self) -> dict:
        return {n: to_json(v) for n, v in zip(self.schema.names, self.values)}

    def restrict(self, names: Iterable[str]) -> tuple:
        """Projection onto ``names`` as a sorted tuple of (name, value)."""
        idx = self.schema.index
        return tuple((n, self.values[idx[n]]) for n in sorted(names) if n in idx)


class _TrackingState(State):
    __slots__ = ("accessed",)

    def __init__(self, s: State):
        super().__init__(s.schema, s.values)
        self.accessed = set()

    def __getitem__(self, name):
        self.accessed.add(name)
        return State.__getitem__(self, name)


# ---------------------------------------------------------------------------
# actions and invariants

def _no_bindings(s, c):
    return None


@dataclass(frozen=True)
class ActionDef:
    """A named guarded deterministic update.

    ``params`` is a sequence of ``(name, domain)`` where ``domain`` is either
    an iterable or a callable of the system constants.  ``guard(s, c, **b)``
    returns a bool and ``update(s, c, **b)`` returns a dict of changed
    variables.  ``reads`` lists guard variables; ``writes`` maps each
    assigned variable to the variables its new value is computed from.
    ``optional`` variables are only touched when present in the composition.
    """

    name: str
    module: str
    params: tuple = ()
    guard: Callable = field(default=lambda s, c, **b: True, compare=False)
    update: Callable = field(default=lambda s, c, **b: {}, compare=False)
    reads: frozenset = frozenset()
    writes: Mapping = field(default_factory=dict, compare=False)
    optional: frozenset = frozenset()
    # optional fast path: yields candidate binding dicts (guard still checked)
    candidates: Callable | None = field(default=None, compare=False)

    def variables(self) -> frozenset:
        out = set(self.reads) | set(self.writes)
        for deps in self.writes.values():
            out |= set(deps)
        return frozenset(out)

    def domains(self, constants) -> list[tuple[str, tuple]]:
        out = []
        for pname, dom in self.params:
            vals = dom(constants) if callable(dom) else dom
            out.append((pname, tuple(vals)))
        return out


@dataclass(frozen=True, order=True)
class ActionInstance:
    name: str
    bindings: tuple = ()

    @property
    def args(self) -> dict:
        return dict(self.bindings)

    def sort_key(self):
        k = _SORT_KEYS.get(self)
        if k is None:
            k = _SORT_KEYS[self] = (self.name, dumps(to_json(tuple(self.bindings))))
        return k

    def to_json(self) -> dict:
        return {"action": self.name, "bindings": {k: to_json(v) for k, v in self.bindings}}

    def __str__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.bindings)
        return f"{self.name}({args})"


_SORT_KEYS: dict = {}


@dataclass(frozen=True)
class Invariant:
    """Safety predicate.

    ``kind == "state"``: ``check(state, constants) -> bool`` evaluated on every
    newly reached state.  ``kind == "transition"``: ``check(pre, inst, post,
    constants) -> bool`` evaluated on transitions by actions in ``triggers``
    (all actions when ``triggers`` is None).
    """

    id: str
    check: Callable = field(compare=False)
    kind: str = "state"
    triggers: frozenset | None = None
    level: str = "protocol"
    description: str = ""

    def fires_on(self, action_name: str) -> bool:
        return self.kind == "transition" and (self.triggers is None or action_name in self.triggers)


# ---------------------------------------------------------------------------
# systems

@dataclass
class System:
    """Variables, initial states, actions, constants and invariants."""

    variables: frozenset
    init: tuple
    actions: tuple
    constants: Any = None
    invariants: tuple = ()
    validate: bool = False

    def __post_init__(self):
        self.variables = frozenset(self.variables)
        self.actions = tuple(self.actions)
        self.init = tuple(self.init)
        self._by_name = {a.name: a for a in self.actions}
        if len(self._by_name) != len(self.actions):
            raise KernelError("duplicate action names")
        self._domains = {a.name: a.domains(self.constants) for a in self.actions}

    def action(self, name: str) -> ActionDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise KernelError(f"unknown action {name!r}") from None

    def action_names(self) -> frozenset:
        return frozenset(self._by_name)


def _check_conforms(sys_: System, s: State):
    names = set(s.schema.names)
    if names != sys_.variables:
        missing = sorted(sys_.variables - names)
        extra = sorted(names - sys_.variables)
        raise MalformedState(f"state does not match declarations (missing={missing}, extra={extra})")


def _guard(sys_: System, a: ActionDef, s: State, b: dict) -> bool:
    if not sys_.validate:
        return bool(a.guard(s, sys_.constants, **b))
    ts = _TrackingState(s)
    ok = bool(a.guard(ts, sys_.constants, **b))
    bad = ts.accessed - set(a.reads)
    if bad:
        raise MetadataViolation(f"{a.name}: guard read undeclared {sorted(bad)}")
    return ok


def _update(sys_: System, a: ActionDef, s: State, b: dict) -> State:
    if not sys_.validate:
        return s.replace(a.update(s, sys_.constants, **b))
    ts = _TrackingState(s)
    changes = a.update(ts, sys_.constants, **b)
    allowed = set(a.reads) | set(a.writes)
    for deps in a.writes.values():
        allowed |= set(deps)
    bad = ts.accessed - allowed
    if bad:
        raise MetadataViolation(f"{a.name}: update read undeclared {sorted(bad)}")
    undeclared = set(changes) - set(a.writes)
    if undeclared:
        raise MetadataViolation(f"{a.name}: wrote undeclared {sorted(undeclared)}")
    return s.replace(changes)


def _bindings(sys_: System, a: ActionDef, s: State):
    if a.candidates is not None:
        yield from a.candidates(s, sys_.constants)
        return
    doms = sys_._domains[a.name]
    if not doms:
        yield {}
        return
    names = [n for n, _ in doms]
    for combo in itertools.product(*(d for _, d in doms)):
        yield dict(zip(names, combo))


def enumerate_enabled(sys_: System, s: State) -> list[ActionInstance]:
    """All enabled action instances in ``s``, sorted deterministically."""
    _check_conforms(sys_, s)
    return [inst for inst, _ in _successors(sys_, s, build=False)]


def _successors(sys_: System, s: State, build: bool = True) -> list[tuple[ActionInstance, State | None]]:
    out = []
    for a in sys_.actions:
        for b in _bindings(sys_, a, s):
            if _guard(sys_, a, s, b):
                inst = ActionInstance(a.name, tuple(sorted(b.items())))
                out.append((inst, _update(sys_, a, s, b) if build else None))
    out.sort(key=lambda p: p[0].sort_key())
    return out


def successors(sys_: System, s: State) -> list[tuple[ActionInstance, State]]:
    return _successors(sys_, s)


def apply(sys_: System, inst: ActionInstance, s: State) -> State:
    """Unique successor of ``s`` under ``inst``."""
    a = sys_.action(inst.name)
    b = inst.args
    if not _guard(sys_, a, s, b):
        raise GuardNotEnabled(f"{inst} is not enabled")
    return _update(sys_, a, s, b)


# ---------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class Trace:
    init: State
    steps: tuple = ()

    def __len__(self):
        return len(self.steps)

    @property
    def states(self) -> list[State]:
        return [self.init] + [st for _, st in self.steps]

    @property
    def last(self) -> State:
        return self.steps[-1][1] if self.steps else self.init

    @property
    def actions(self) -> list[ActionInstance]:
        return [a for a, _ in self.steps]

    def validate(self, sys_: System) -> None:
        """Raise if any step does not follow from its predecessor."""
        prev = self.init
        for k, (inst, st) in enumerate(self.steps, 1):
            got = apply(sys_, inst, prev)
            if got != st:
                raise KernelError(f"step {k} ({inst}) does not replay")
            prev = st

    def prefix(self, n: int) -> "Trace":
        return Trace(self.init, self.steps[:n])


# ---------------------------------------------------------------------------
# breadth-first checking

@dataclass
class ExplorationBounds:
    max_states: int | None = None
    max_depth: int | None = None
    time_limit: float | None = None


@dataclass
class CheckResult:
    outcome: str  # complete | violation-found | budget-exhausted
    violations: list
    states_explored: int
    distinct_states: int
    max_depth: int
    violation_counts: dict = field(default_factory=dict)

    def violated(self) -> set:
        return set(self.violation_counts)


def _parse_stop(stop) -> tuple[str, int | None]:
    if isinstance(stop, tuple):
        return stop
    if stop in ("first", "first-violation"):
        return "first", 1
    if stop in ("complete", "to-completion"):
        return "complete", None
    if isinstance(stop, str) and stop.startswith("limit="):
        return "limit", int(stop.split("=", 1)[1])
    raise ValueError(f"bad stop mode {stop!r}")


def _expand_chunk(sys_: System, chunk: list[State]):
    return [_successors(sys_, s) for s in chunk]


def bfs_check(
    sys_: System,
    invariants: Iterable[Invariant] | None = None,
    bounds: ExplorationBounds | None = None,
    stop="first",
    workers: int = 1,
    prune: Callable | None = None,
    record_limit: int = 10_000,
    exact: bool = False,
) -> CheckResult:
    """Level-by-level exploration with invariant checking.

    ``prune(pre, inst, post, violated_ids) -> bool``: when true the
    transition is dropped (neither reported nor explored).

    Visited states are kept as 64-bit fingerprints with a parent pointer
    and the action that reached them; only the current frontier holds full
    states, and counterexamples are rebuilt by replaying the recorded
    actions.  ``exact=True`` keys the visited set by the full state instead.
    """
    invs = list(sys_.invariants if invariants is None else invariants)
    state_invs = [i for i in invs if i.kind == "state"]
    trans_invs = [i for i in invs if i.kind == "transition"]
    bounds = bounds or ExplorationBounds()
    mode, limit = _parse_stop(stop)
    c = sys_.constants
    t0 = time.monotonic()

    key = (lambda s: s) if exact else hash
    index: dict = {}            # fingerprint (or state) -> state id
    parents = array("q")        # state id -> parent id (-1 for initial states)
    via = array("q")            # state id -> interned action instance id
    roots: dict[int, State] = {}
    inst_ids: dict[ActionInstance, int] = {}
    insts: list[ActionInstance] = []
    counts: dict[str, int] = {}
    found: list[tuple[str, int, int]] = []  # (invariant, state id, extra action id or -1)

    def intern(inst: ActionInstance) -> int:
        k = inst_ids.get(inst)
        if k is None:
            k = inst_ids[inst] = len(insts)
            insts.append(inst)
        return k

    def record(inv_id: str, sid: int, extra: int = -1):
        counts[inv_id] = counts.get(inv_id, 0) + 1
        if len(found) < record_limit:
            found.append((inv_id, sid, extra))

    def done() -> bool:
        return limit is not None and sum(counts.values()) >= limit

    frontier: list[tuple[int, State]] = []
    for s in sys_.init:
        _check_conforms(sys_, s)
        k = key(s)
        if k in index:
            continue
        sid = index[k] = len(parents)
        parents.append(-1)
        via.append(-1)
        roots[sid] = s
        frontier.append((sid, s))
        for inv in state_invs:
            if not inv.check(s, c):
                record(inv.id, sid)

    explored = 0
    depth = 0
    outcome = "complete"
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while frontier and not done():
            if bounds.max_depth is not None and depth >= bounds.max_depth:
                outcome = "budget-exhausted"
                break
            if pool is not None:
                states = [s for _, s in frontier]
                size = max(1, (len(states) + workers - 1) // workers)
                chunks = [states[k:k + size] for k in range(0, len(states), size)]
                expanded = [r for part in pool.map(lambda ch: _expand_chunk(sys_, ch), chunks) for r in part]
            else:
                expanded = None
            nxt: list[tuple[int, State]] = []
            for n, (sid, s) in enumerate(frontier):
                succ = expanded[n] if expanded is not None else _successors(sys_, s)
                explored += 1
                for inst, t in succ:
                    bad = [inv.id for inv in trans_invs
                           if inv.fires_on(inst.name) and not inv.check(s, inst, t, c)]
                    if prune is not None and prune(s, inst, t, bad):
                        continue
                    if bad:
                        a = intern(inst)
                        for inv_id in bad:
                            record(inv_id, sid, a)
                    k = key(t)
                    if k in index:
                        continue
                    tid = index[k] = len(parents)
                    parents.append(sid)
                    via.append(intern(inst))
                    nxt.append((tid, t))
                    for inv in state_invs:
                        if not inv.check(t, c):
                            record(inv.id, tid)
                    if done():
                        break
                if done():
                    break
                if bounds.max_states is not None and len(parents) >= bounds.max_states:
                    outcome = "budget-exhausted"
                    break
                if bounds.time_limit is not None and time.monotonic() - t0 > bounds.time_limit:
                    outcome = "budget-exhausted"
                    break
            if outcome == "budget-exhausted":
                break
            if nxt:
                depth += 1
            frontier = nxt
    finally:
        if pool is not None:
            pool.shutdown()

    if found and outcome == "complete" and mode != "complete":
        outcome = "violation-found"

    def rebuild(sid: int, extra: int) -> Trace:
        path = [] if extra < 0 else [insts[extra]]
        while parents[sid] >= 0:
            path.append(insts[via[sid]])
            sid = parents[sid]
        root = roots[sid]
        steps = []
        cur = root
        for inst in reversed(path):
            a = sys_.action(inst.name)
            cur = _update(sys_, a, cur, inst.args)
            steps.append((inst, cur))
        return Trace(root, tuple(steps))

    violations = [(inv_id, rebuild(sid, extra)) for inv_id, sid, extra in found]
    return CheckResult(outcome, violations, explored, len(parents), depth, counts)


def reachable(sys_: System, max_states: int | None = None) -> set:
    """Set of reachable states (plain worklist, used as an oracle)."""
    seen = set(sys_.init)
    work = list(sys_.init)
    while work:
        s = work.pop()
        for _, t in _successors(sys_, s):
            if t not in seen:
                seen.add(t)
                work.append(t)
                if max_states is not None and len(seen) > max_states:
                    raise KernelError("state budget exceeded")
    return seen


# ---------------------------------------------------------------------------
# random walks

def random_walk(sys_: System, seed: int, max_steps: int, max_traces: int = 1) -> list[Trace]:
    """``max_traces`` seeded walks of at most ``max_steps`` uniform steps."""
    rng = random.Random(seed)
    traces = []
    for k in range(max_traces):
        s0 = sys_.init[rng.randrange(len(sys_.init))] if len(sys_.init) > 1 else sys_.init[0]
        steps = []
        s = s0
        for _ in range(max_steps):
            succ = _successors(sys_, s)
            if not succ:
                break
            inst, s = succ[rng.randrange(len(succ))]
            steps.append((inst, s))
        traces.append(Trace(s0, tuple(steps)))
    return traces
