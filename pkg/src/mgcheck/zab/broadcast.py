"""Broadcast phase: the leader proposes, followers log and acknowledge, the
leader commits on a quorum of acknowledgements.

``fine-concurrency`` hands follower logging and committing to the sync and
commit threads declared by the concurrent Synchronization variant.
"""

from __future__ import annotations

from ..algebra import ModuleSpec
from ..kernel import ActionDef
from .common import (BROADCAST, FOLLOWING, LEADING, NODES, W, channels, index_of, per_node, pop, push, upd,
                     zxid)
from .election import CORE_INIT
from .sync import commit_to, log_items


def _propose_guard(s, c, i):
    return (s["state"][i] == LEADING and s["zabState"][i] == BROADCAST
            and s["txnCount"] < c.max_txns)


def _propose_update(s, c, i):
    w = W(s)
    h = s["history"][i]
    e = s["currentEpoch"][i]
    k = h[-1][1] + 1 if h and h[-1][0] == e else 1
    entry = (e, k, s["txnCount"] + 1)
    w.setn("history", i, h + (entry,))
    w["txnCount"] = s["txnCount"] + 1
    w["ghostProposed"] = s["ghostProposed"] | {entry}
    ch = s["msgs"]
    for j in sorted(s["forwarding"][i]):
        ch = push(ch, i, j, ("PROPOSAL", entry))
    w["msgs"] = ch
    return w.ch


LeaderProposeRequest = ActionDef(
    "LeaderProposeRequest", "Broadcast", (("i", NODES),), _propose_guard, _propose_update,
    reads=frozenset({"state", "zabState", "txnCount"}),
    writes={"history": frozenset({"history", "currentEpoch", "txnCount"}),
            "txnCount": frozenset({"txnCount"}),
            "ghostProposed": frozenset({"ghostProposed", "history", "currentEpoch", "txnCount"}),
            "msgs": frozenset({"msgs", "forwarding", "history", "currentEpoch", "txnCount"})})


def _msg_pairs(s, c):
    ch = s["msgs"]
    for j in range(c.nodes):
        for i in range(c.nodes):
            if ch[j][i]:
                yield {"i": i, "j": j}


def _head(s, i, j):
    q = s["msgs"][j][i]
    return q[0] if q else None


def _fguard(kind):
    def g(s, c, i, j):
        m = _head(s, i, j)
        return (m is not None and m[0] == kind and s["state"][i] == FOLLOWING
                and s["zabState"][i] == BROADCAST)
    return g


def _proposal_update(s, c, i, j):
    w = W(s)
    entry = _head(s, i, j)[1]
    w["msgs"] = pop(s["msgs"], j, i)
    log_items(w, i, ((entry, False),))
    w["msgs"] = push(w["msgs"], i, j, ("ACK", zxid(entry)))
    return w.ch


def _proposal_queue_update(s, c, i, j):
    entry = _head(s, i, j)[1]
    return {"msgs": pop(s["msgs"], j, i),
            "queuedRequests": upd(s["queuedRequests"], i, s["queuedRequests"][i] + ((entry, False),))}


_F_READS = frozenset({"msgs", "state", "zabState"})

FollowerProcessPROPOSAL = ActionDef(
    "FollowerProcessPROPOSAL", "Broadcast", (("i", NODES), ("j", NODES)),
    _fguard("PROPOSAL"), _proposal_update, reads=_F_READS,
    writes={"msgs": frozenset({"msgs"}),
            "history": frozenset({"history", "msgs"}),
            "lastCommitted": frozenset({"lastCommitted", "history"})},
    candidates=_msg_pairs)

FollowerProcessPROPOSAL_queued = ActionDef(
    "FollowerProcessPROPOSAL", "Broadcast", (("i", NODES), ("j", NODES)),
    _fguard("PROPOSAL"), _proposal_queue_update, reads=_F_READS,
    writes={"msgs": frozenset({"msgs"}),
            "queuedRequests": frozenset({"queuedRequests", "msgs"})},
    candidates=_msg_pairs)


def _commit_update(s, c, i, j):
    z = _head(s, i, j)[1]
    out = {"msgs": pop(s["msgs"], j, i)}
    k = index_of(s["history"][i], z)
    if k > s["lastCommitted"][i]:
        out["lastCommitted"] = upd(s["lastCommitted"], i, k)
    return out


def _commit_queue_update(s, c, i, j):
    z = _head(s, i, j)[1]
    return {"msgs": pop(s["msgs"], j, i),
            "committedRequests": upd(s["committedRequests"], i, s["committedRequests"][i] + (z,))}


FollowerProcessCOMMIT = ActionDef(
    "FollowerProcessCOMMIT", "Broadcast", (("i", NODES), ("j", NODES)),
    _fguard("COMMIT"), _commit_update, reads=_F_READS,
    writes={"msgs": frozenset({"msgs"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "msgs"})},
    candidates=_msg_pairs)

FollowerProcessCOMMIT_queued = ActionDef(
    "FollowerProcessCOMMIT", "Broadcast", (("i", NODES), ("j", NODES)),
    _fguard("COMMIT"), _commit_queue_update, reads=_F_READS,
    writes={"msgs": frozenset({"msgs"}),
            "committedRequests": frozenset({"committedRequests", "msgs"})},
    candidates=_msg_pairs)


def _ack_guard(s, c, i, j):
    m = _head(s, i, j)
    return (s["state"][i] == LEADING and m is not None and m[0] == "ACK"
            and isinstance(m[1], tuple) and m[1][1] > 0)


def _ack_update(s, c, i, j):
    w = W(s)
    z = _head(s, i, j)[1]
    w["msgs"] = pop(s["msgs"], j, i)
    h = s["history"][i]
    lc = s["lastCommitted"][i]
    if index_of(h, z) <= lc:
        return w.ch
    acks = s["proposalAcks"][i] | {(z, j)}
    members = s["learners"][i]
    ch = w["msgs"]
    n = lc
    while n < len(h):
        zn = zxid(h[n])
        if 1 + sum(1 for (x, k) in acks if x == zn and k in members) < c.quorum:
            break
        n += 1
        for k in sorted(s["forwarding"][i]):
            ch = push(ch, i, k, ("COMMIT", zn))
    if n > lc:
        commit_to(w, i, n)
        done = {zxid(e) for e in h[:n]}
        acks = frozenset(a for a in acks if a[0] not in done)
    w["msgs"] = ch
    w.setn("proposalAcks", i, acks)
    return w.ch


LeaderProcessACK = ActionDef(
    "LeaderProcessACK", "Broadcast", (("i", NODES), ("j", NODES)), _ack_guard, _ack_update,
    reads=frozenset({"state", "msgs"}),
    writes={"msgs": frozenset({"msgs", "history", "lastCommitted", "proposalAcks", "learners",
                               "forwarding"}),
            "proposalAcks": frozenset({"proposalAcks", "msgs", "history", "lastCommitted", "learners"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "proposalAcks", "msgs", "learners"}),
            "ghostCommitted": frozenset({"ghostCommitted", "history", "lastCommitted", "proposalAcks",
                                         "msgs", "learners"})},
    candidates=_msg_pairs)

BROADCAST_VARS = {
    **CORE_INIT,
    "msgs": channels,
    "forwarding": per_node(frozenset()),
    "proposalAcks": per_node(frozenset()),
    "txnCount": 0,
    "ghostProposed": frozenset(),
    "ghostCommitted": (),
}

BASELINE = ModuleSpec(
    "Broadcast", "baseline",
    (LeaderProposeRequest, FollowerProcessPROPOSAL, LeaderProcessACK, FollowerProcessCOMMIT),
    BROADCAST_VARS,
    description="follower logs and acknowledges a proposal in one step",
)

FINE_CONCURRENCY = ModuleSpec(
    "Broadcast", "fine-concurrency",
    (LeaderProposeRequest, FollowerProcessPROPOSAL_queued, LeaderProcessACK, FollowerProcessCOMMIT_queued),
    BROADCAST_VARS,
    description="proposals and commits are handed to the follower's sync and commit threads",
)
