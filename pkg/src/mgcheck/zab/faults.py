"""Crash, restart, partition and heal, bounded by budget counters in the state."""

from __future__ import annotations

from ..algebra import ModuleSpec
from ..kernel import ActionDef
from .common import (CHANNEL_VARS, FOLLOWING, NODES, SHUTDOWN_READS, SHUTDOWN_WRITES, W, clear_pair,
                     per_node, shutdown)


def _pairs(c):
    return tuple((i, j) for i in c.node_ids for j in c.node_ids if i < j)


def _crash_guard(s, c, i):
    return s["alive"][i] and s["crashesLeft"] > 0


def _crash_update(s, c, i):
    w = W(s)
    shutdown(w, i, c, crash=True)
    w.setn("alive", i, False)
    w["crashesLeft"] = s["crashesLeft"] - 1
    return w.ch


def _restart_update(s, c, i):
    return {"alive": s["alive"][:i] + (True,) + s["alive"][i + 1:]}


def _partition_guard(s, c, p):
    return s["partitionsLeft"] > 0 and frozenset(p) not in s["partition"]


def _partition_update(s, c, p):
    i, j = p
    w = W(s)
    w["partition"] = s["partition"] | {frozenset(p)}
    w["partitionsLeft"] = s["partitionsLeft"] - 1
    for var in CHANNEL_VARS:
        if var in w:
            w[var] = clear_pair(w[var], i, j)
    for a, b in ((i, j), (j, i)) if "state" in w else ():
        if w["state"][b] == FOLLOWING and w["leaderOf"][b] == a:
            shutdown(w, b, c)
    return w.ch


def _heal_update(s, c, p):
    return {"partition": s["partition"] - {frozenset(p)}}


_SHUT = {v: SHUTDOWN_READS | {v} for v in SHUTDOWN_WRITES}
_OPTIONAL = SHUTDOWN_WRITES - {"state", "leaderOf", "learners"}

Crash = ActionDef(
    "Crash", "Faults", (("i", NODES),), _crash_guard, _crash_update,
    reads=frozenset({"alive", "crashesLeft"}),
    writes={**_SHUT, "alive": frozenset({"alive"}), "crashesLeft": frozenset({"crashesLeft"})},
    optional=_OPTIONAL | {"state", "leaderOf", "learners"})

Restart = ActionDef(
    "Restart", "Faults", (("i", NODES),), lambda s, c, i: not s["alive"][i], _restart_update,
    reads=frozenset({"alive"}), writes={"alive": frozenset({"alive"})})

PartitionStart = ActionDef(
    "PartitionStart", "Faults", (("p", _pairs),), _partition_guard, _partition_update,
    reads=frozenset({"partition", "partitionsLeft"}),
    writes={**_SHUT, "partition": frozenset({"partition"}),
            "partitionsLeft": frozenset({"partitionsLeft"})},
    optional=_OPTIONAL | {"state", "leaderOf", "learners"})

PartitionHeal = ActionDef(
    "PartitionHeal", "Faults", (("p", _pairs),),
    lambda s, c, p: frozenset(p) in s["partition"], _heal_update,
    reads=frozenset({"partition"}), writes={"partition": frozenset({"partition"})})

FAULTS = ModuleSpec(
    "Faults", "standard", (Crash, Restart, PartitionStart, PartitionHeal),
    {"alive": per_node(True), "partition": frozenset(),
     "crashesLeft": lambda c: c.max_crashes, "partitionsLeft": lambda c: c.max_partitions},
    description="node crash/restart and pairwise partitions within the fault budget",
)
