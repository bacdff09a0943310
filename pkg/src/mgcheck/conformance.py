"""Replay model traces against the simulator.

Each model action maps to a small set of simulator events plus an end
condition.  A coordinator repeatedly applies the first enabled candidate
event until the end condition holds (usually an instrumentation mark), then
compares the mapped variables.  A step ends in one of four ways:

* conformant: the mapped variables agree;
* ``value``: some mapped variable differs;
* ``timeout``: the end condition never held within the event budget;
* ``impl-fault``: the simulator raised an implementation error.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from .algebra import ComposedSpec
from .kernel import State, Trace, random_walk
from .sim import (FOLLOWING, LEADING, BugFlags, Cluster, Scenario, SimEvent, observe)

BASE_VARS = ("currentEpoch", "acceptedEpoch", "history", "lastCommitted", "state", "zabState",
             "leaderOf", "msgs")
THREAD_VARS = ("queuedRequests", "committedRequests")
MAX_EVENTS = 500

# bug flags that make the simulator match each Synchronization granularity
FLAGS_BY_GRANULARITY = {
    "baseline": ("zk4394",),
    "fine-atomicity": ("zk4394", "zk4643", "zk4646"),
    "fine-atomicity+concurrency": BugFlags.NAMES,
    "improved": (),
}


class UnmappedAction(Exception):
    """The trace uses an action the simulator mapping does not cover."""


@dataclass(frozen=True)
class Discrepancy:
    step: int
    action: str
    kind: str  # value | timeout | impl-fault
    variables: dict = field(default_factory=dict)  # name -> (model, implementation)
    detail: str = ""

    def report(self) -> str:
        lines = [f"step {self.step} ({self.action}): {self.kind} discrepancy"]
        if self.detail:
            lines.append(f"  {self.detail}")
        for v, (m, impl) in sorted(self.variables.items()):
            lines.append(f"  {v}: model={m!r}")
            lines.append(f"  {' ' * len(v)}  impl ={impl!r}")
        return "\n".join(lines)


@dataclass
class ReplayResult:
    conformant: bool
    steps_replayed: int
    discrepancy: Discrepancy | None
    events: list
    cluster: Cluster

    def report(self) -> str:
        if self.conformant:
            return f"conformant: {self.steps_replayed} steps, {len(self.events)} simulator events"
        return self.discrepancy.report()


@dataclass
class _Plan:
    candidates: Callable  # (cluster, applied) -> list[SimEvent]
    done: Callable        # (cluster, new_marks) -> bool


def sync_granularity(spec: ComposedSpec) -> str | None:
    try:
        return spec.selected("Synchronization").granularity
    except Exception:
        return None


def default_flags(spec: ComposedSpec) -> BugFlags:
    """Flags that match the composed model's Synchronization granularity."""
    g = sync_granularity(spec) or ""
    g = g.replace("-no-uptodate-ack", "")
    if g not in FLAGS_BY_GRANULARITY:
        raise UnmappedAction(f"no simulator configuration for Synchronization granularity {g!r}")
    return BugFlags.of(*FLAGS_BY_GRANULARITY[g])


def mapped_variables(spec: ComposedSpec) -> tuple:
    return BASE_VARS + tuple(v for v in THREAD_VARS if v in spec.variables)


# -- action mapping -----------------------------------------------------------------

def _deliver(i, j, kind="peer"):
    return SimEvent("deliver-message", (i, j), kind)


def _task(i, name, *extra):
    return SimEvent("run-task-step", (i, name, *extra))


def _mark(*m):
    return lambda cl, marks: tuple(m) in marks


def _fixed(*events):
    return lambda cl, applied: list(events)


def _then(first, *rest):
    """``first`` may only start the step; ``rest`` finish it."""
    return lambda cl, applied: ([first] if applied == 0 else []) + list(rest)


def _head_zxid(pre: State, i: int, j: int):
    m = pre["msgs"][j][i][0]
    v = m[1]
    return (v[0], v[1]) if m[0] == "PROPOSAL" else v


def _ed_plan(pre: State, i: int, q: tuple) -> _Plan:
    if pre["state"][i] == LEADING:
        (k,) = q

        def cands(cl, applied):
            if applied == 0:
                return [_task(k, "election")]
            return [_deliver(i, k, "quorum"), _deliver(k, i, "quorum"),
                    _deliver(i, k, "election"), _deliver(k, i, "election")]

        def done(cl, marks):
            ld, f = cl.nodes[i], cl.nodes[k]
            return k in ld.learners and f.role == FOLLOWING and f.leader == i
        return _Plan(cands, done)

    def cands(cl, applied):
        if applied == 0:
            return [_task(i, "election")]
        out = []
        for k in q:
            out += [_deliver(k, i, "election"), _deliver(i, k, "election"),
                    _deliver(k, i, "quorum"), _deliver(i, k, "quorum")]
        return out

    def done(cl, marks):
        ld = cl.nodes[i]
        return (ld.role == LEADING and ld.learners == set(q)
                and all(cl.nodes[k].role == FOLLOWING and cl.nodes[k].leader == i for k in q))
    return _Plan(cands, done)


def _plan(name: str, args: dict, pre: State, queued: bool) -> _Plan:
    i = args.get("i")
    j = args.get("j")
    if name == "ElectionAndDiscovery":
        return _ed_plan(pre, i, tuple(args["q"]))
    if name == "LeaderSyncFollower":
        return _Plan(_fixed(_task(i, "learner", j)), _mark("synced", i, j))
    if name == "FollowerProcessSyncMessage":
        return _Plan(_fixed(_deliver(i, j)), _mark("sync-msg", i))
    nl = _then(_deliver(i, j), _task(i, "handler"))
    if name == "FollowerProcessNEWLEADER":
        if len(pre["msgs"][j][i][0]) > 2:
            raise UnmappedAction("NEWLEADER carrying a whole history has no simulator counterpart")
        return _Plan(nl, _mark("nl-ack", i))
    if name == "FollowerProcessNEWLEADERUpdateEpoch":
        return _Plan(nl, _mark("nl-epoch", i))
    if name == "FollowerProcessNEWLEADERUpdateHistory":
        return _Plan(nl, _mark("nl-history", i))
    if name == "FollowerProcessNEWLEADERQueuePackets":
        return _Plan(nl, _mark("nl-queued", i))
    if name == "FollowerProcessNEWLEADERReplyACK":
        return _Plan(nl, _mark("nl-ack", i))
    if name == "FollowerProcessNEWLEADERLogAsync":
        def flushed(cl, marks):
            n = cl.nodes[i]
            return bool(marks) and not n.sync_buf and not n.sync_q
        return _Plan(_fixed(_task(i, "syncProcessor"), _task(i, "handler")), flushed)
    if name in ("FollowerProcessPROPOSALInSync", "FollowerProcessPROPOSAL"):
        z = _head_zxid(pre, i, j)
        if queued:
            return _Plan(_fixed(_deliver(i, j)), _mark("queued", i, z))
        return _Plan(_then(_deliver(i, j), _task(i, "syncProcessor")), _mark("logged", i, z))
    if name in ("FollowerProcessCOMMITInSync", "FollowerProcessCOMMIT"):
        z = _head_zxid(pre, i, j)
        if queued:
            return _Plan(_fixed(_deliver(i, j)), _mark("commit-handled", i, z))

        def applied(cl, marks):
            return ("commit-handled", i, z) in marks and not cl.nodes[i].commit_q
        return _Plan(_then(_deliver(i, j), _task(i, "commitProcessor")), applied)
    if name == "FollowerProcessUPTODATE":
        return _Plan(_then(_deliver(i, j), _task(i, "commitProcessor"), _task(i, "handler")),
                     _mark("uptodate-done", i))
    if name == "LeaderProcessACK":
        return _Plan(_fixed(_deliver(i, j)), _mark("ack-handled", i, j))
    if name == "LeaderProcessACKLD":
        return _Plan(_fixed(_deliver(i, j)), _mark("ackld", i, j))
    if name == "LeaderProcessACKUPTODATE":
        return _Plan(_fixed(_deliver(i, j)), _mark("ack-uptodate", i, j))
    if name == "LeaderProposeRequest":
        return _Plan(_fixed(SimEvent("client-propose", (i,))), lambda cl, m: any(x[0] == "proposed" for x in m))
    if name == "FollowerSyncProcessorLogRequest":
        return _Plan(_fixed(_task(i, "syncProcessor")), lambda cl, m: any(x[0] == "logged" for x in m))
    if name == "FollowerCommitProcessorCommit":
        return _Plan(_fixed(_task(i, "commitProcessor")), lambda cl, m: any(x[0] == "commit-applied" for x in m))
    if name == "Crash":
        return _Plan(_fixed(SimEvent("crash", (i,))), _mark("crash", i))
    if name == "Restart":
        return _Plan(_fixed(SimEvent("restart", (i,))), _mark("restart", i))
    if name == "PartitionStart":
        p = tuple(args["p"])
        return _Plan(_fixed(SimEvent("partition", p)), _mark("partition", *p))
    if name == "PartitionHeal":
        p = tuple(args["p"])
        return _Plan(_fixed(SimEvent("heal", p)), _mark("heal", *p))
    raise UnmappedAction(f"action {name} has no simulator mapping")


def check_mappable(spec: ComposedSpec, trace: Trace) -> None:
    for inst in trace.actions:
        if inst.name in ("ElectionAndDiscovery",) or inst.name in _MAPPED:
            continue
        raise UnmappedAction(f"action {inst.name} has no simulator mapping")


_MAPPED = frozenset({
    "LeaderSyncFollower", "FollowerProcessSyncMessage", "FollowerProcessNEWLEADER",
    "FollowerProcessNEWLEADERUpdateEpoch", "FollowerProcessNEWLEADERUpdateHistory",
    "FollowerProcessNEWLEADERQueuePackets", "FollowerProcessNEWLEADERReplyACK",
    "FollowerProcessNEWLEADERLogAsync", "FollowerProcessPROPOSALInSync", "FollowerProcessPROPOSAL",
    "FollowerProcessCOMMITInSync", "FollowerProcessCOMMIT", "FollowerProcessUPTODATE", "LeaderProcessACK",
    "LeaderProcessACKLD", "LeaderProcessACKUPTODATE", "LeaderProposeRequest",
    "FollowerSyncProcessorLogRequest", "FollowerCommitProcessorCommit", "Crash", "Restart",
    "PartitionStart", "PartitionHeal",
})


# -- replay ------------------------------------------------------------------------------

def _compare(model: State, obs: dict, names) -> dict:
    return {v: (model[v], obs[v]) for v in names if model[v] != obs[v]}


def replay(spec: ComposedSpec, trace: Trace, flags: BugFlags | None = None,
           compare: tuple | None = None, max_events: int = MAX_EVENTS) -> ReplayResult:
    """Drive the simulator through ``trace`` step by step.

    ``compare`` defaults to every mapped variable.  ``flags`` defaults to the
    flags matching the model's Synchronization granularity.
    """
    check_mappable(spec, trace)
    flags = default_flags(spec) if flags is None else flags
    names = mapped_variables(spec) if compare is None else tuple(compare)
    queued = "queuedRequests" in spec.variables
    cl = Cluster(Scenario(spec.constants.nodes, flags))
    events: list[SimEvent] = []
    diff = _compare(trace.init, observe(cl).as_dict(), names)
    if diff:
        return ReplayResult(False, 0, Discrepancy(0, "init", "value", diff), events, cl)
    pre = trace.init
    for k, (inst, post) in enumerate(trace.steps, 1):
        plan = _plan(inst.name, inst.args, pre, queued)
        start, faults = len(cl.marks), len(cl.faults)
        applied = 0
        ended = False
        while applied < max_events:
            ev = next((e for e in plan.candidates(cl, applied) if cl.apply(e)), None)
            if ev is None:
                break
            events.append(ev)
            applied += 1
            if len(cl.faults) > faults:
                node, msg = cl.faults[-1]
                d = Discrepancy(k, str(inst), "impl-fault", detail=f"node {node}: {msg}")
                return ReplayResult(False, k, d, events, cl)
            if plan.done(cl, cl.marks[start:]):
                ended = True
                break
        if not ended:
            why = "no candidate event enabled" if applied < max_events else f"{max_events} events"
            d = Discrepancy(k, str(inst), "timeout", detail=f"end of action not reached ({why})")
            return ReplayResult(False, k, d, events, cl)
        diff = _compare(post, observe(cl).as_dict(), names)
        if diff:
            return ReplayResult(False, k, Discrepancy(k, str(inst), "value", diff), events, cl)
        pre = post
    return ReplayResult(True, len(trace), None, events, cl)


# -- bug confirmation -----------------------------------------------------------------------

@dataclass
class Confirmation:
    invariant: str
    confirmed: bool
    reason: str
    replay: ReplayResult

    def report(self) -> str:
        verdict = "CONFIRMED" if self.confirmed else "not confirmed"
        return f"{self.invariant}: {verdict} ({self.reason})"


# variables a confirmation replay compares: node-local state only, because
# coarse granularities omit the follower's UPTODATE acknowledgement
CONFIRM_VARS = tuple(v for v in BASE_VARS if v != "msgs")


def _translated(model: State, cl: Cluster, names) -> State:
    obs = observe(cl).as_dict()
    return model.replace({v: obs[v] for v in names})


def confirm_violation(spec: ComposedSpec, trace: Trace, invariant_id: str,
                      flags: BugFlags | None = None) -> Confirmation:
    """Reproduce the violation at the end of ``trace`` in the simulator."""
    invs = [inv for inv in spec.invariants if inv.id == invariant_id or inv.id.startswith(invariant_id)]
    if not invs:
        raise KeyError(f"spec has no invariant {invariant_id!r}")
    inv = invs[0]
    names = CONFIRM_VARS + tuple(v for v in THREAD_VARS if v in spec.variables)
    res = replay(spec, trace, flags, compare=names)
    last = len(trace)
    if not res.conformant:
        d = res.discrepancy
        if d.kind == "impl-fault" and d.step == last and inv.id.startswith("C-ZK4394"):
            return Confirmation(inv.id, True, f"implementation error at step {last}: {d.detail}", res)
        return Confirmation(inv.id, False, f"replay diverged: {d.kind} at step {d.step}", res)
    c = spec.constants
    post = _translated(trace.last, res.cluster, names)
    if inv.kind == "state":
        ok = inv.check(post, c)
    else:
        if not trace.steps:
            return Confirmation(inv.id, False, "empty trace", res)
        # the pre-state is rebuilt by replaying the prefix
        pre_res = replay(spec, trace.prefix(last - 1), flags, compare=names)
        pre = _translated(trace.states[-2], pre_res.cluster, names)
        ok = inv.check(pre, trace.actions[-1], post, c)
    if ok:
        return Confirmation(inv.id, False, "implementation state satisfies the invariant", res)
    return Confirmation(inv.id, True, "violated on the implementation state after a conformant replay", res)


def mark_known_buggy(invariant_ids) -> Callable:
    """Prune predicate for :func:`bfs_check` that stops exploring past known bugs."""
    ids = tuple(invariant_ids)

    def prune(pre, inst, post, violated) -> bool:
        return any(v.startswith(p) for v in violated for p in ids)
    return prune


# -- conformance campaigns ---------------------------------------------------------------------

@dataclass
class ConformanceReport:
    traces: int
    steps: int
    discrepancies: list  # (seed, Discrepancy)

    @property
    def value_discrepancies(self) -> list:
        return [d for _, d in self.discrepancies if d.kind == "value"]

    def report(self) -> str:
        lines = [f"{self.traces} traces, {self.steps} steps, {len(self.discrepancies)} discrepant traces"]
        kinds: dict[str, int] = {}
        for _, d in self.discrepancies:
            kinds[d.kind] = kinds.get(d.kind, 0) + 1
        lines += [f"  {k}: {n}" for k, n in sorted(kinds.items())]
        if self.discrepancies:
            seed, d = self.discrepancies[0]
            lines.append(f"first (seed {seed}):")
            lines.append(d.report())
        return "\n".join(lines)


def conformance_check(spec: ComposedSpec, traces: int = 200, max_steps: int = 30, seed: int = 0,
                      flags: BugFlags | None = None) -> ConformanceReport:
    """Replay seeded random walks of ``spec`` and collect discrepancies."""
    rng = random.Random(seed)
    total = 0
    found = []
    for _ in range(traces):
        s = rng.randrange(2 ** 31)
        (t,) = random_walk(spec, s, max_steps)
        total += len(t)
        res = replay(spec, t, flags)
        if not res.conformant:
            found.append((s, res.discrepancy))
    return ConformanceReport(traces, total, found)
