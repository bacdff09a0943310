"""Synchronization phase at five granularities.

``protocol``
    NEWLEADER carries the leader's whole history; the follower adopts it
    and the new epoch in one step.
``baseline``
    DIFF/TRUNC/SNAP followed by NEWLEADER; the follower updates its epoch,
    logs the synced packets and acknowledges atomically.
``fine-atomicity``
    NEWLEADER handling split into epoch update, asynchronous logging and
    acknowledgement.
``fine-atomicity+concurrency``
    logging and committing move to the sync and commit threads
    (``queuedRequests`` / ``committedRequests``); the follower also
    acknowledges UPTODATE.
``improved``
    history is logged synchronously before the epoch update, commits during
    sync are tolerated and UPTODATE is acknowledged after committing.
"""

from __future__ import annotations

from ..algebra import ModuleSpec
from ..kernel import ActionDef
from .common import (BROADCAST, FOLLOWING, INITIAL, LEADING, NODES, RUNNING, SHUTDOWN_READS,
                     SHUTDOWN_WRITES, SYNCHRONIZATION, ZERO, W, channels, index_of, last_zxid, per_node,
                     pop, push, shutdown, upd, zxid)
from .election import CORE_INIT

UPTODATE_ACK = "UPTODATE"
# variables every system-level variant declares
_SYSTEM_DECLARED = frozenset(CORE_INIT) | {"msgs", "forwarding", "ackld", "ghostCommitted",
                                           "syncPackets", "packetsNotCommitted"}

# -- leader helpers -----------------------------------------------------------


def commit_to(w: W, i: int, n: int):
    """Leader ``i`` commits its history up to length ``n``; tracks the ghost log."""
    w.setn("lastCommitted", i, n)
    done = w["history"][i][:n]
    g = w["ghostCommitted"]
    if len(done) > len(g) and done[:len(g)] == g:
        w["ghostCommitted"] = done


def sync_message(hist, lc, z):
    """Choose DIFF/TRUNC/SNAP for a follower whose last zxid is ``z``."""
    zs = [zxid(e) for e in hist]
    if z == ZERO or z in zs:
        kind, t = "DIFF", z
        p = zs.index(z) + 1 if z != ZERO else 0
    elif z > last_zxid(hist):
        kind, t, p = "TRUNC", last_zxid(hist), len(hist)
    else:
        below = [x for x in zs if x < z]
        t = below[-1] if below else ZERO
        p = len(below)
        kind = "SNAP" if p < lc else "TRUNC"
    if kind == "SNAP":
        p, t = 0, ZERO
    items = tuple((e, k < lc) for k, e in enumerate(hist) if k >= p)
    return (kind, t, items)


def _pending_sync(s, c):
    for i in range(c.nodes):
        for j, _ in sorted(s["syncPending"][i]):
            yield {"i": i, "j": j}


def _lsync_guard(s, c, i, j):
    return s["state"][i] == LEADING and any(p[0] == j for p in s["syncPending"][i])


def _lsync_update_factory(protocol: bool):
    def update(s, c, i, j):
        w = W(s)
        (z,) = [p[1] for p in s["syncPending"][i] if p[0] == j]
        e = s["acceptedEpoch"][i]
        ch = s["msgs"]
        if protocol:
            ch = push(ch, i, j, ("NEWLEADER", e, s["history"][i]))
        else:
            ch = push(ch, i, j, sync_message(s["history"][i], s["lastCommitted"][i], z))
            ch = push(ch, i, j, ("NEWLEADER", e))
        w["msgs"] = ch
        w.setn("syncPending", i, frozenset(p for p in s["syncPending"][i] if p[0] != j))
        w.setn("forwarding", i, s["forwarding"][i] | {j})
        return w.ch
    return update


def _lsync(protocol: bool) -> ActionDef:
    return ActionDef(
        "LeaderSyncFollower", "Synchronization", (("i", NODES), ("j", NODES)),
        _lsync_guard, _lsync_update_factory(protocol),
        reads=frozenset({"state", "syncPending"}),
        writes={"msgs": frozenset({"msgs", "syncPending", "acceptedEpoch", "history", "lastCommitted"}),
                "syncPending": frozenset({"syncPending"}),
                "forwarding": frozenset({"forwarding"})},
        candidates=_pending_sync)


def _msg_pairs(s, c):
    ch = s["msgs"]
    for j in range(c.nodes):
        for i in range(c.nodes):
            if ch[j][i]:
                yield {"i": i, "j": j}


def _head(s, i, j):
    q = s["msgs"][j][i]
    return q[0] if q else None


def _ackld_guard(s, c, i, j):
    m = _head(s, i, j)
    return (s["state"][i] == LEADING and m is not None and m[0] == "ACK"
            and m[1] == (s["acceptedEpoch"][i], 0))


def _uptodate_msg(w, i):
    h, lc = w["history"][i], w["lastCommitted"][i]
    return ("UPTODATE", last_zxid(h[:lc]))


def _ackld_update(s, c, i, j):
    w = W(s)
    w["msgs"] = pop(s["msgs"], j, i)
    acked = s["ackld"][i] | {j}
    w.setn("ackld", i, acked)
    if s["zabState"][i] == SYNCHRONIZATION:
        if 1 + len(acked) >= c.quorum:
            w.setn("zabState", i, BROADCAST)
            w.setn("currentEpoch", i, s["acceptedEpoch"][i])
            commit_to(w, i, len(s["history"][i]))
            ch = w["msgs"]
            for k in sorted(acked):
                ch = push(ch, i, k, _uptodate_msg(w, i))
            w["msgs"] = ch
    else:
        w["msgs"] = push(w["msgs"], i, j, _uptodate_msg(w, i))
    return w.ch


_LEADER_COMMIT_DEPS = frozenset({"history", "lastCommitted", "ghostCommitted"})

LeaderProcessACKLD = ActionDef(
    "LeaderProcessACKLD", "Synchronization", (("i", NODES), ("j", NODES)),
    _ackld_guard, _ackld_update,
    reads=frozenset({"state", "msgs", "acceptedEpoch"}),
    writes={"msgs": frozenset({"msgs", "ackld", "zabState", "history", "lastCommitted"}),
            "ackld": frozenset({"ackld"}),
            "zabState": frozenset({"zabState", "ackld"}),
            "currentEpoch": frozenset({"acceptedEpoch", "zabState", "ackld"}),
            "lastCommitted": frozenset({"history", "zabState", "ackld"}),
            "ghostCommitted": _LEADER_COMMIT_DEPS | {"zabState", "ackld"}},
    candidates=_msg_pairs)


def _ackup_guard(s, c, i, j):
    m = _head(s, i, j)
    return s["state"][i] == LEADING and m is not None and m == ("ACK", UPTODATE_ACK)


def _ackup_update(s, c, i, j):
    return {"msgs": pop(s["msgs"], j, i),
            "uptodateAcked": upd(s["uptodateAcked"], i, s["uptodateAcked"][i] | {j})}


LeaderProcessACKUPTODATE = ActionDef(
    "LeaderProcessACKUPTODATE", "Synchronization", (("i", NODES), ("j", NODES)),
    _ackup_guard, _ackup_update,
    reads=frozenset({"state", "msgs"}),
    writes={"msgs": frozenset({"msgs"}), "uptodateAcked": frozenset({"uptodateAcked"})},
    candidates=_msg_pairs)


# -- follower helpers ------------------------------------------------------------

def _fguard(kind, extra=None):
    def g(s, c, i, j):
        m = _head(s, i, j)
        if m is None or m[0] not in kind or s["state"][i] != FOLLOWING or s["zabState"][i] != SYNCHRONIZATION:
            return False
        return extra is None or extra(s, c, i, j, m)
    return g


def log_items(w: W, i: int, items):
    """Append (entry, committed-at-leader) items to the log of ``i``."""
    h = w["history"][i]
    lc = w["lastCommitted"][i]
    for e, committed in items:
        h = h + (e,)
        if committed:
            lc = max(lc, len(h))
    w.setn("history", i, h)
    if lc != w["lastCommitted"][i]:
        w.setn("lastCommitted", i, lc)


def _syncmsg_update(s, c, i, j):
    w = W(s)
    kind, t, items = _head(s, i, j)
    w["msgs"] = pop(s["msgs"], j, i)
    h, lc = s["history"][i], s["lastCommitted"][i]
    if kind == "TRUNC":
        h = tuple(e for e in h if zxid(e) <= t)
        w.setn("history", i, h)
        w.setn("lastCommitted", i, min(lc, len(h)))
    elif kind == "SNAP":
        snap = tuple(e for e, f in items if f)
        items = tuple(x for x in items if not x[1])
        w.setn("history", i, snap)
        w.setn("lastCommitted", i, len(snap))
    w.setn("syncPackets", i, items)
    w.setn("packetsNotCommitted", i, tuple(e for e, f in items if not f))
    return w.ch


_F_READS = frozenset({"msgs", "state", "zabState"})

FollowerProcessSyncMessage = ActionDef(
    "FollowerProcessSyncMessage", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("DIFF", "TRUNC", "SNAP")), _syncmsg_update,
    reads=_F_READS,
    writes={"msgs": frozenset({"msgs"}),
            "history": frozenset({"history", "msgs"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "msgs"}),
            "syncPackets": frozenset({"msgs"}),
            "packetsNotCommitted": frozenset({"msgs"})},
    candidates=_msg_pairs)


def _ack(w: W, i: int, j: int, z):
    w["msgs"] = push(w["msgs"], i, j, ("ACK", z))


# protocol-level NEWLEADER: adopt the leader's history and epoch atomically
def _nl_protocol_update(s, c, i, j):
    w = W(s)
    _, e, hist = _head(s, i, j)
    w["msgs"] = pop(s["msgs"], j, i)
    w.setn("currentEpoch", i, e)
    w.setn("history", i, hist)
    w.setn("lastCommitted", i, min(s["lastCommitted"][i], len(hist)))
    _ack(w, i, j, (e, 0))
    return w.ch


# baseline NEWLEADER: epoch, log, ack in one step
def _nl_baseline_update(s, c, i, j):
    w = W(s)
    _, e = _head(s, i, j)
    w["msgs"] = pop(s["msgs"], j, i)
    w.setn("currentEpoch", i, e)
    log_items(w, i, s["syncPackets"][i])
    w.setn("syncPackets", i, ())
    w.setn("packetsNotCommitted", i, ())
    _ack(w, i, j, (e, 0))
    return w.ch


_NL_WRITES = {
    "msgs": frozenset({"msgs"}),
    "currentEpoch": frozenset({"msgs"}),
    "history": frozenset({"history", "msgs", "syncPackets"}),
    "lastCommitted": frozenset({"lastCommitted", "history", "msgs", "syncPackets"}),
    "syncPackets": frozenset(),
    "packetsNotCommitted": frozenset(),
}


def _is_newleader(s, c, i, j, m):
    return True


FollowerProcessNEWLEADER_protocol = ActionDef(
    "FollowerProcessNEWLEADER", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("NEWLEADER",)), _nl_protocol_update,
    reads=_F_READS,
    writes={k: _NL_WRITES[k] for k in ("msgs", "currentEpoch", "history", "lastCommitted")},
    candidates=_msg_pairs)

FollowerProcessNEWLEADER_baseline = ActionDef(
    "FollowerProcessNEWLEADER", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("NEWLEADER",)), _nl_baseline_update,
    reads=_F_READS, writes=_NL_WRITES, candidates=_msg_pairs)


# fine-grained NEWLEADER pieces
def _epoch_differs(s, c, i, j, m):
    return s["currentEpoch"][i] != m[1]


def _epoch_same(s, c, i, j, m):
    return s["currentEpoch"][i] == m[1]


def _epoch_same_logged(s, c, i, j, m):
    return s["currentEpoch"][i] == m[1] and not s["syncPackets"][i]


def _epoch_same_unlogged(s, c, i, j, m):
    return s["currentEpoch"][i] == m[1] and bool(s["syncPackets"][i])


def _update_epoch(s, c, i, j):
    return {"currentEpoch": upd(s["currentEpoch"], i, _head(s, i, j)[1])}


FollowerProcessNEWLEADERUpdateEpoch = ActionDef(
    "FollowerProcessNEWLEADERUpdateEpoch", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("NEWLEADER",), _epoch_differs), _update_epoch,
    reads=_F_READS | {"currentEpoch"},
    writes={"currentEpoch": frozenset({"msgs"})},
    candidates=_msg_pairs)


def _reply_ack(s, c, i, j):
    w = W(s)
    e = _head(s, i, j)[1]
    w["msgs"] = pop(s["msgs"], j, i)
    w.setn("packetsNotCommitted", i, ())
    _ack(w, i, j, (e, 0))
    return w.ch


def _reply_ack_action(extra):
    return ActionDef(
        "FollowerProcessNEWLEADERReplyACK", "Synchronization", (("i", NODES), ("j", NODES)),
        _fguard(("NEWLEADER",), extra), _reply_ack,
        reads=_F_READS | {"currentEpoch", "syncPackets"},
        writes={"msgs": frozenset({"msgs"}), "packetsNotCommitted": frozenset()},
        candidates=_msg_pairs)


def _nodes_with(var):
    def cand(s, c):
        for i in range(c.nodes):
            if s[var][i]:
                yield {"i": i}
    return cand


def _logasync_guard(s, c, i):
    if s["state"][i] != FOLLOWING or not s["syncPackets"][i]:
        return False
    q = s["msgs"][s["leaderOf"][i]][i]
    # the epoch update precedes logging
    return not (q and q[0][0] == "NEWLEADER" and s["currentEpoch"][i] != q[0][1])


def _logasync_update(s, c, i):
    w = W(s)
    log_items(w, i, s["syncPackets"][i])
    w.setn("syncPackets", i, ())
    return w.ch


FollowerProcessNEWLEADERLogAsync = ActionDef(
    "FollowerProcessNEWLEADERLogAsync", "Synchronization", (("i", NODES),),
    _logasync_guard, _logasync_update,
    reads=frozenset({"state", "syncPackets", "msgs", "leaderOf", "currentEpoch"}),
    writes={"history": frozenset({"history", "syncPackets"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "syncPackets"}),
            "syncPackets": frozenset()},
    candidates=_nodes_with("syncPackets"))


def _queue_packets(s, c, i, j):
    return {"queuedRequests": upd(s["queuedRequests"], i, s["queuedRequests"][i] + s["syncPackets"][i]),
            "syncPackets": upd(s["syncPackets"], i, ())}


FollowerProcessNEWLEADERQueuePackets = ActionDef(
    "FollowerProcessNEWLEADERQueuePackets", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("NEWLEADER",), _epoch_same_unlogged), _queue_packets,
    reads=_F_READS | {"currentEpoch", "syncPackets"},
    writes={"queuedRequests": frozenset({"queuedRequests", "syncPackets"}), "syncPackets": frozenset()},
    candidates=_msg_pairs)


def _sync_thread_update(s, c, i):
    w = W(s)
    item = s["queuedRequests"][i][0]
    w.setn("queuedRequests", i, s["queuedRequests"][i][1:])
    log_items(w, i, (item,))
    if s["state"][i] == FOLLOWING:
        _ack(w, i, s["leaderOf"][i], zxid(item[0]))
    return w.ch


FollowerSyncProcessorLogRequest = ActionDef(
    "FollowerSyncProcessorLogRequest", "Synchronization", (("i", NODES),),
    lambda s, c, i: s["alive"][i] and bool(s["queuedRequests"][i]), _sync_thread_update,
    reads=frozenset({"alive", "queuedRequests"}),
    writes={"queuedRequests": frozenset({"queuedRequests"}),
            "history": frozenset({"history", "queuedRequests"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "queuedRequests"}),
            "msgs": frozenset({"msgs", "state", "leaderOf", "queuedRequests"})},
    candidates=_nodes_with("queuedRequests"))


def _commit_thread_guard(s, c, i):
    q = s["committedRequests"][i]
    return s["alive"][i] and bool(q) and (q[0] == ZERO or index_of(s["history"][i], q[0]) > 0)


def _commit_thread_update(s, c, i):
    q = s["committedRequests"][i]
    k = index_of(s["history"][i], q[0])
    return {"committedRequests": upd(s["committedRequests"], i, q[1:]),
            "lastCommitted": upd(s["lastCommitted"], i, max(k, s["lastCommitted"][i]))}


FollowerCommitProcessorCommit = ActionDef(
    "FollowerCommitProcessorCommit", "Synchronization", (("i", NODES),),
    _commit_thread_guard, _commit_thread_update,
    reads=frozenset({"alive", "committedRequests", "history"}),
    writes={"committedRequests": frozenset({"committedRequests"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "committedRequests"})},
    candidates=_nodes_with("committedRequests"))


# -- in-sync PROPOSAL / COMMIT / UPTODATE -------------------------------------------

def _no_sync_backlog(s, c, i, j, m):
    return not s["syncPackets"][i]


def _proposal_log_update(s, c, i, j):
    w = W(s)
    entry = _head(s, i, j)[1]
    w["msgs"] = pop(s["msgs"], j, i)
    log_items(w, i, ((entry, False),))
    w.setn("packetsNotCommitted", i, s["packetsNotCommitted"][i] + (entry,))
    return w.ch


def _proposal_queue_update(s, c, i, j):
    w = W(s)
    entry = _head(s, i, j)[1]
    w["msgs"] = pop(s["msgs"], j, i)
    w.setn("queuedRequests", i, s["queuedRequests"][i] + ((entry, False),))
    w.setn("packetsNotCommitted", i, s["packetsNotCommitted"][i] + (entry,))
    return w.ch


def _proposal_in_sync(queue: bool) -> ActionDef:
    if queue:
        upd_fn = _proposal_queue_update
        writes = {"msgs": frozenset({"msgs"}),
                  "queuedRequests": frozenset({"queuedRequests", "msgs"}),
                  "packetsNotCommitted": frozenset({"packetsNotCommitted", "msgs"})}
    else:
        upd_fn = _proposal_log_update
        writes = {"msgs": frozenset({"msgs"}),
                  "history": frozenset({"history", "msgs"}),
                  "lastCommitted": frozenset({"lastCommitted", "history"}),
                  "packetsNotCommitted": frozenset({"packetsNotCommitted", "msgs"})}
    return ActionDef(
        "FollowerProcessPROPOSALInSync", "Synchronization", (("i", NODES), ("j", NODES)),
        _fguard(("PROPOSAL",), _no_sync_backlog), upd_fn,
        reads=_F_READS | {"syncPackets"}, writes=writes, candidates=_msg_pairs)


def _commit_in_sync_factory(mode: str):
    """mode: 'npe' (shut down on empty pending list), 'queue' (npe + commit thread),
    'tolerant' (commit any logged zxid)."""
    def update(s, c, i, j):
        w = W(s)
        z = _head(s, i, j)[1]
        w["msgs"] = pop(s["msgs"], j, i)
        pend = s["packetsNotCommitted"][i]
        if not pend and mode != "tolerant":
            # no matching pending request: the handler throws and sync aborts
            shutdown(w, i, c)
            return w.ch
        if pend and zxid(pend[0]) == z:
            w.setn("packetsNotCommitted", i, pend[1:])
        elif mode != "tolerant":
            return w.ch
        if mode == "queue":
            w.setn("committedRequests", i, s["committedRequests"][i] + (z,))
        else:
            k = index_of(s["history"][i], z)
            if k > s["lastCommitted"][i]:
                w.setn("lastCommitted", i, k)
        return w.ch
    return update


def _commit_in_sync(mode: str) -> ActionDef:
    writes = {"msgs": frozenset({"msgs"}),
              "packetsNotCommitted": frozenset({"packetsNotCommitted", "msgs"})}
    optional = frozenset()
    if mode == "queue":
        writes["committedRequests"] = frozenset({"committedRequests", "msgs", "packetsNotCommitted"})
    else:
        writes["lastCommitted"] = frozenset({"lastCommitted", "history", "msgs", "packetsNotCommitted"})
    if mode != "tolerant":
        for v in SHUTDOWN_WRITES:
            writes[v] = writes.get(v, frozenset()) | SHUTDOWN_READS | {v, "packetsNotCommitted"}
        optional = SHUTDOWN_WRITES - _SYSTEM_DECLARED
    return ActionDef(
        "FollowerProcessCOMMITInSync", "Synchronization", (("i", NODES), ("j", NODES)),
        _fguard(("COMMIT",), _no_sync_backlog), _commit_in_sync_factory(mode),
        reads=_F_READS | {"syncPackets"}, writes=writes, optional=optional, candidates=_msg_pairs)


def _uptodate_factory(mode: str):
    """mode: 'silent' (no reply), 'ack-after-commit', 'ack-then-commit-thread'."""
    def update(s, c, i, j):
        w = W(s)
        z = _head(s, i, j)[1]
        w["msgs"] = pop(s["msgs"], j, i)
        w.setn("zabState", i, BROADCAST)
        if mode == "ack-then-commit-thread":
            w.setn("committedRequests", i, s["committedRequests"][i] + (z,))
        else:
            k = index_of(s["history"][i], z)
            if k > s["lastCommitted"][i]:
                w.setn("lastCommitted", i, k)
        if mode == "ack-after-commit":
            w.setn("servingState", i, RUNNING)
            w.setn("packetsNotCommitted", i, ())
        if mode != "silent":
            _ack(w, i, j, UPTODATE_ACK)
        return w.ch
    return update


def _uptodate(mode: str) -> ActionDef:
    writes = {"msgs": frozenset({"msgs"}), "zabState": frozenset()}
    if mode == "ack-then-commit-thread":
        writes["committedRequests"] = frozenset({"committedRequests", "msgs"})
    else:
        writes["lastCommitted"] = frozenset({"lastCommitted", "history", "msgs"})
    if mode == "ack-after-commit":
        writes["servingState"] = frozenset()
        writes["packetsNotCommitted"] = frozenset()
    return ActionDef(
        "FollowerProcessUPTODATE", "Synchronization", (("i", NODES), ("j", NODES)),
        _fguard(("UPTODATE",), _no_sync_backlog), _uptodate_factory(mode),
        reads=_F_READS | {"syncPackets"}, writes=writes, candidates=_msg_pairs)


# improved NEWLEADER: history first, then epoch (gated by servingState)
def _nl_history_update(s, c, i, j):
    w = W(s)
    log_items(w, i, s["syncPackets"][i])
    w.setn("syncPackets", i, ())
    return w.ch


FollowerProcessNEWLEADERUpdateHistory = ActionDef(
    "FollowerProcessNEWLEADERUpdateHistory", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("NEWLEADER",), lambda s, c, i, j, m: bool(s["syncPackets"][i])), _nl_history_update,
    reads=_F_READS | {"syncPackets"},
    writes={"history": frozenset({"history", "syncPackets"}),
            "lastCommitted": frozenset({"lastCommitted", "history", "syncPackets"}),
            "syncPackets": frozenset()},
    candidates=_msg_pairs)


def _nl_epoch_improved_update(s, c, i, j):
    w = W(s)
    e = _head(s, i, j)[1]
    w["msgs"] = pop(s["msgs"], j, i)
    w.setn("currentEpoch", i, e)
    _ack(w, i, j, (e, 0))
    return w.ch


FollowerProcessNEWLEADERUpdateEpochImproved = ActionDef(
    "FollowerProcessNEWLEADERUpdateEpoch", "Synchronization", (("i", NODES), ("j", NODES)),
    _fguard(("NEWLEADER",), lambda s, c, i, j, m: not s["syncPackets"][i] and s["servingState"][i] == INITIAL),
    _nl_epoch_improved_update,
    reads=_F_READS | {"syncPackets", "servingState"},
    writes={"msgs": frozenset({"msgs"}), "currentEpoch": frozenset({"msgs"})},
    candidates=_msg_pairs)


# -- variants -------------------------------------------------------------------------

SYNC_VARS = {
    **CORE_INIT,
    "msgs": channels,
    "forwarding": per_node(frozenset()),
    "ackld": per_node(frozenset()),
    "ghostCommitted": (),
}
SYSTEM_VARS = {**SYNC_VARS, "syncPackets": per_node(()), "packetsNotCommitted": per_node(())}

PROTOCOL = ModuleSpec(
    "Synchronization", "protocol",
    (_lsync(True), FollowerProcessNEWLEADER_protocol, LeaderProcessACKLD,
     _proposal_in_sync(False), _commit_in_sync("tolerant"), _uptodate("silent")),
    {**SYNC_VARS, "packetsNotCommitted": per_node(()), "syncPackets": per_node(())},
    description="NEWLEADER carries the whole history; epoch and history adopted atomically",
)

BASELINE = ModuleSpec(
    "Synchronization", "baseline",
    (_lsync(False), FollowerProcessSyncMessage, FollowerProcessNEWLEADER_baseline, LeaderProcessACKLD,
     _proposal_in_sync(False), _commit_in_sync("npe"), _uptodate("silent")),
    SYSTEM_VARS,
    description="DIFF/TRUNC/SNAP then an atomic NEWLEADER step (epoch, log, ACK)",
)

FINE_ATOMICITY = ModuleSpec(
    "Synchronization", "fine-atomicity",
    (_lsync(False), FollowerProcessSyncMessage, FollowerProcessNEWLEADERUpdateEpoch,
     FollowerProcessNEWLEADERLogAsync, _reply_ack_action(_epoch_same), LeaderProcessACKLD,
     _proposal_in_sync(False), _commit_in_sync("npe"), _uptodate("silent")),
    SYSTEM_VARS,
    description="NEWLEADER split into epoch update, asynchronous log and ACK",
)

FINE_CONCURRENCY = ModuleSpec(
    "Synchronization", "fine-atomicity+concurrency",
    (_lsync(False), FollowerProcessSyncMessage, FollowerProcessNEWLEADERUpdateEpoch,
     FollowerProcessNEWLEADERQueuePackets, _reply_ack_action(_epoch_same_logged),
     FollowerSyncProcessorLogRequest, FollowerCommitProcessorCommit, LeaderProcessACKLD,
     LeaderProcessACKUPTODATE, _proposal_in_sync(True), _commit_in_sync("queue"),
     _uptodate("ack-then-commit-thread")),
    {**SYSTEM_VARS, "queuedRequests": per_node(()), "committedRequests": per_node(()),
     "uptodateAcked": per_node(frozenset())},
    description="follower sync and commit threads; UPTODATE acknowledged before committing",
)

IMPROVED = ModuleSpec(
    "Synchronization", "improved",
    (_lsync(False), FollowerProcessSyncMessage, FollowerProcessNEWLEADERUpdateHistory,
     FollowerProcessNEWLEADERUpdateEpochImproved, LeaderProcessACKLD, LeaderProcessACKUPTODATE,
     _proposal_in_sync(False), _commit_in_sync("tolerant"), _uptodate("ack-after-commit")),
    {**SYSTEM_VARS, "servingState": per_node(INITIAL), "uptodateAcked": per_node(frozenset())},
    description="history logged before the epoch update; UPTODATE acknowledged after commit",
)


def without_uptodate_ack(m: ModuleSpec) -> ModuleSpec:
    """Drop the follower's reply to UPTODATE (and the leader's handler for it)."""
    acts = []
    for a in m.actions:
        if a.name == "LeaderProcessACKUPTODATE":
            continue
        if a.name == "FollowerProcessUPTODATE":
            a = _uptodate_silent_serving()
        acts.append(a)
    return ModuleSpec(m.name, m.granularity + "-no-uptodate-ack", tuple(acts), m.variables,
                      m.invariants, m.description + " (no UPTODATE acknowledgement)")


def _uptodate_silent_serving() -> ActionDef:
    def update(s, c, i, j):
        w = W(s)
        z = _head(s, i, j)[1]
        w["msgs"] = pop(s["msgs"], j, i)
        w.setn("zabState", i, BROADCAST)
        k = index_of(s["history"][i], z)
        if k > s["lastCommitted"][i]:
            w.setn("lastCommitted", i, k)
        w.setn("servingState", i, RUNNING)
        w.setn("packetsNotCommitted", i, ())
        return w.ch
    return ActionDef(
        "FollowerProcessUPTODATE", "Synchronization", (("i", NODES), ("j", NODES)),
        _fguard(("UPTODATE",), _no_sync_backlog), update,
        reads=_F_READS | {"syncPackets"},
        writes={"msgs": frozenset({"msgs"}), "zabState": frozenset(),
                "lastCommitted": frozenset({"lastCommitted", "history", "msgs"}),
                "servingState": frozenset(), "packetsNotCommitted": frozenset()},
        candidates=_msg_pairs)
