"""Leader election and discovery: the baseline eight-action vote/epoch
exchange and the coarse single-action ElectionAndDiscovery.

The baseline variant exchanges votes and epochs through single-slot
channels (a newer notification overwrites an unread older one).  Its only
writes that other modules can observe happen when a leader establishes a
new ensemble at quorum or admits a joining follower, which is what makes
the coarse variant a faithful replacement for log-replication analysis.
"""

from __future__ import annotations

import itertools

from ..algebra import ModuleSpec
from ..kernel import ActionDef
from .common import (DISCOVERY, ELECTION, FOLLOWING, LEADING, LOOKING, NODES, PAIRS, SYNCHRONIZATION,
                     W, channels, last_zxid, linked, per_node, upd, vote_of)

# variables written when an ensemble is established or a follower joins
ESTABLISH_WRITES = {
    "state": frozenset({"state"}),
    "zabState": frozenset(),
    "acceptedEpoch": frozenset({"acceptedEpoch"}),
    "leaderOf": frozenset(),
    "learners": frozenset({"learners"}),
    "syncPending": frozenset({"syncPending", "history"}),
}

CORE_INIT = {
    "state": per_node(LOOKING),
    "zabState": per_node(ELECTION),
    "currentEpoch": per_node(0),
    "acceptedEpoch": per_node(0),
    "history": per_node(()),
    "lastCommitted": per_node(0),
    "leaderOf": per_node(None),
    "learners": per_node(frozenset()),
    "syncPending": per_node(frozenset()),
}

ED_VARS = ("state", "zabState", "currentEpoch", "acceptedEpoch", "history", "leaderOf",
           "learners", "syncPending")


def _establish(w: W, i: int, followers, e: int):
    for k in (i, *followers):
        w.setn("state", k, LEADING if k == i else FOLLOWING)
        w.setn("zabState", k, SYNCHRONIZATION)
        w.setn("acceptedEpoch", k, e)
        w.setn("leaderOf", k, i)
    w.setn("learners", i, frozenset(followers))
    w.setn("syncPending", i, frozenset((k, last_zxid(w["history"][k])) for k in followers))


def _join(w: W, i: int, k: int):
    w.setn("state", k, FOLLOWING)
    w.setn("zabState", k, SYNCHRONIZATION)
    w.setn("acceptedEpoch", k, w["acceptedEpoch"][i])
    w.setn("leaderOf", k, i)
    w.setn("learners", i, w["learners"][i] | {k})
    sp = frozenset(p for p in w["syncPending"][i] if p[0] != k)
    w.setn("syncPending", i, sp | {(k, last_zxid(w["history"][k]))})


def can_establish(s, c, i, followers) -> bool:
    """Leader ``i`` with ``followers`` forms a new ensemble in ``s``."""
    if len(followers) != c.quorum - 1 or i in followers:
        return False
    members = (i, *followers)
    if any(s["state"][k] != LOOKING or not s["alive"][k] for k in members):
        return False
    if not all(linked(s, i, k) for k in followers):
        return False
    vi = vote_of(s, i)
    return all(vote_of(s, k) < vi for k in followers)


def can_join(s, c, i, k) -> bool:
    return (s["state"][i] == LEADING and s["state"][k] == LOOKING and linked(s, i, k)
            and s["acceptedEpoch"][k] <= s["acceptedEpoch"][i])


def new_epoch(s, members) -> int:
    return max(s["acceptedEpoch"][k] for k in members) + 1


# ---------------------------------------------------------------------------
# coarse variant

def _follower_sets(c):
    sizes = sorted({1, c.quorum - 1})
    out = []
    for n in sizes:
        out += list(itertools.combinations(c.node_ids, n))
    return tuple(out)


def _ed_guard(s, c, i, q):
    if i in q:
        return False
    if s["state"][i] == LEADING:
        return len(q) == 1 and can_join(s, c, i, q[0])
    return can_establish(s, c, i, q)


def _ed_update(s, c, i, q):
    w = W(s)
    if s["state"][i] == LEADING:
        _join(w, i, q[0])
    else:
        _establish(w, i, q, new_epoch(s, (i, *q)))
    return w.ch


ElectionAndDiscovery = ActionDef(
    "ElectionAndDiscovery", "ElectionAndDiscovery",
    params=(("i", NODES), ("q", _follower_sets)),
    guard=_ed_guard, update=_ed_update,
    reads=frozenset({"state", "alive", "partition", "currentEpoch", "history", "acceptedEpoch"}),
    writes=ESTABLISH_WRITES,
)

COARSE = ModuleSpec(
    "ElectionAndDiscovery", "coarse", (ElectionAndDiscovery,),
    {v: CORE_INIT[v] for v in ED_VARS},
    description="one atomic step elects a leader for a quorum and moves it to synchronization",
)


# ---------------------------------------------------------------------------
# baseline election: abstract vote exchange

def _broadcast_vote(w: W, s, i, vote, est=False):
    ch = w["electionMsgs"]
    for j in range(len(ch)):
        if j != i and linked(s, i, j):
            ch = upd(ch, i, upd(ch[i], j, ((vote, est),)))
    w["electionMsgs"] = ch


def _start_guard(s, c, i):
    return s["alive"][i] and s["state"][i] == LOOKING


def _start_update(s, c, i):
    w = W(s)
    v = vote_of(s, i)
    w.setn("currentVote", i, v)
    w.setn("recvVotes", i, upd((None,) * c.nodes, i, v))
    w.setn("decision", i, None)
    w.setn("connecting", i, frozenset())
    w.setn("proposedEpoch", i, None)
    w.setn("ackepochRecv", i, frozenset())
    w.setn("followerEpoch", i, None)
    _broadcast_vote(w, s, i, v)
    return w.ch


def _msg_from(var):
    def cand(s, c):
        ch = s[var]
        for j in range(c.nodes):
            for i in range(c.nodes):
                if ch[j][i]:
                    yield {"i": i, "j": j}
    return cand


def _handle_guard(s, c, i, j):
    return (s["alive"][i] and s["state"][i] == LOOKING and bool(s["electionMsgs"][j][i])
            and s["currentVote"][i] is not None)


def _handle_update(s, c, i, j):
    w = W(s)
    (vote, est), = s["electionMsgs"][j][i]
    w["electionMsgs"] = upd(s["electionMsgs"], j, upd(s["electionMsgs"][j], i, ()))
    if est:
        if s["decision"][i] is None:
            w.setn("decision", i, vote[2])
        return w.ch
    w.setn("recvVotes", i, upd(s["recvVotes"][i], j, vote))
    if vote > s["currentVote"][i]:
        w.setn("currentVote", i, vote)
        w.setn("recvVotes", i, upd(w["recvVotes"][i], i, vote))
        _broadcast_vote(w, s, i, vote)
    return w.ch


def _reply_guard(s, c, i, j):
    return s["alive"][i] and s["state"][i] != LOOKING and bool(s["electionMsgs"][j][i])


def _reply_update(s, c, i, j):
    (vote, est), = s["electionMsgs"][j][i]
    ch = upd(s["electionMsgs"], j, upd(s["electionMsgs"][j], i, ()))
    if not est and linked(s, i, j):
        ch = upd(ch, i, upd(ch[i], j, (((-1, (0, 0), s["leaderOf"][i]), True),)))
    return {"electionMsgs": ch}


def _wait_guard(s, c, i):
    v = s["currentVote"][i]
    if not (s["alive"][i] and s["state"][i] == LOOKING and v is not None and s["decision"][i] is None):
        return False
    return sum(1 for x in s["recvVotes"][i] if x == v) >= c.quorum


def _wait_update(s, c, i):
    return {"decision": upd(s["decision"], i, s["currentVote"][i][2])}


_E_READS = frozenset({"alive", "state", "currentVote", "electionMsgs", "decision", "recvVotes"})

FLEStartElection = ActionDef(
    "FLEStartElection", "Election", (("i", NODES),), _start_guard, _start_update,
    reads=frozenset({"alive", "state"}),
    writes={"currentVote": frozenset({"currentEpoch", "history"}),
            "recvVotes": frozenset({"currentEpoch", "history", "recvVotes"}),
            "decision": frozenset(), "connecting": frozenset(), "proposedEpoch": frozenset(),
            "ackepochRecv": frozenset(), "followerEpoch": frozenset(),
            "electionMsgs": frozenset({"electionMsgs", "currentEpoch", "history", "alive", "partition"})})

FLEHandleNotmsg = ActionDef(
    "FLEHandleNotmsg", "Election", (("i", NODES), ("j", NODES)), _handle_guard, _handle_update,
    reads=_E_READS - {"decision", "recvVotes"},
    writes={"electionMsgs": frozenset({"electionMsgs", "currentVote", "alive", "partition"}),
            "decision": frozenset({"decision", "electionMsgs"}),
            "recvVotes": frozenset({"recvVotes", "electionMsgs", "currentVote"}),
            "currentVote": frozenset({"currentVote", "electionMsgs"})},
    candidates=_msg_from("electionMsgs"))

FLEReplyNotmsg = ActionDef(
    "FLEReplyNotmsg", "Election", (("i", NODES), ("j", NODES)), _reply_guard, _reply_update,
    reads=frozenset({"alive", "state", "electionMsgs"}),
    writes={"electionMsgs": frozenset({"electionMsgs", "leaderOf", "alive", "partition"})},
    candidates=_msg_from("electionMsgs"))

FLEWaitNewNotmsg = ActionDef(
    "FLEWaitNewNotmsg", "Election", (("i", NODES),), _wait_guard, _wait_update,
    reads=frozenset({"alive", "state", "currentVote", "decision", "recvVotes"}),
    writes={"decision": frozenset({"decision", "currentVote"})})

ELECTION_VARS = {
    "currentVote": per_node(None),
    "recvVotes": lambda c: tuple((None,) * c.nodes for _ in range(c.nodes)),
    "decision": per_node(None),
    "electionMsgs": channels,
}

ELECTION_BASELINE = ModuleSpec(
    "Election", "baseline",
    (FLEStartElection, FLEHandleNotmsg, FLEReplyNotmsg, FLEWaitNewNotmsg),
    {**ELECTION_VARS, **{v: CORE_INIT[v] for v in ("state", "currentEpoch", "history", "leaderOf")}},
    description="abstract vote exchange: adopt larger votes, decide on quorum agreement",
)


# ---------------------------------------------------------------------------
# baseline discovery

SENT = -1  # followerEpoch marker: FOLLOWERINFO sent, waiting for LEADERINFO


def _setslot(ch, i, j, m):
    return upd(ch, i, upd(ch[i], j, (m,)))


def _clearslot(ch, j, i):
    return upd(ch, j, upd(ch[j], i, ()))


def _connect_guard(s, c, i):
    d = s["decision"][i]
    return (s["alive"][i] and s["state"][i] == LOOKING and d is not None and d != i
            and s["followerEpoch"][i] is None and linked(s, i, d))


def _connect_update(s, c, i):
    d = s["decision"][i]
    return {"discMsgs": _setslot(s["discMsgs"], i, d, ("FOLLOWERINFO", s["acceptedEpoch"][i])),
            "followerEpoch": upd(s["followerEpoch"], i, SENT)}


def _head_is(kind):
    def g(s, c, i, j):
        m = s["discMsgs"][j][i]
        return s["alive"][i] and bool(m) and m[0][0] == kind
    return g


def _finfo_update(s, c, i, j):
    w = W(s)
    (_, a), = s["discMsgs"][j][i]
    ch = _clearslot(s["discMsgs"], j, i)
    if s["state"][i] == LEADING:
        if linked(s, i, j):
            ch = _setslot(ch, i, j, ("LEADERINFO", s["acceptedEpoch"][i]))
    elif s["state"][i] == LOOKING and s["decision"][i] == i:
        conn = frozenset(p for p in s["connecting"][i] if p[0] != j) | {(j, a)}
        w.setn("connecting", i, conn)
        e = s["proposedEpoch"][i]
        if e is None and 1 + len(conn) >= c.quorum:
            e = max([s["acceptedEpoch"][i]] + [x for _, x in conn]) + 1
            w.setn("proposedEpoch", i, e)
            for k, _ in sorted(conn):
                if linked(s, i, k):
                    ch = _setslot(ch, i, k, ("LEADERINFO", e))
        elif e is not None and linked(s, i, j):
            ch = _setslot(ch, i, j, ("LEADERINFO", e))
    w["discMsgs"] = ch
    return w.ch


def _linfo_update(s, c, i, j):
    w = W(s)
    (_, e), = s["discMsgs"][j][i]
    ch = _clearslot(s["discMsgs"], j, i)
    if s["state"][i] == LOOKING and s["decision"][i] == j and s["followerEpoch"][i] == SENT:
        if e < s["acceptedEpoch"][i]:
            w.setn("decision", i, None)
            w.setn("followerEpoch", i, None)
        else:
            w.setn("followerEpoch", i, e)
            if linked(s, i, j):
                ch = _setslot(ch, i, j, ("ACKEPOCH", s["currentEpoch"][i],
                                         last_zxid(s["history"][i]), s["acceptedEpoch"][i]))
    w["discMsgs"] = ch
    return w.ch


def _current(s, k, rec) -> bool:
    ce, z, a = rec
    return (ce == s["currentEpoch"][k] and z == last_zxid(s["history"][k])
            and a == s["acceptedEpoch"][k])


def _reset_internals(w: W, k: int, c):
    w.setn("currentVote", k, None)
    w.setn("recvVotes", k, (None,) * c.nodes)
    w.setn("decision", k, None)
    w.setn("connecting", k, frozenset())
    w.setn("proposedEpoch", k, None)
    w.setn("ackepochRecv", k, frozenset())
    w.setn("followerEpoch", k, None)


def _ackepoch_update(s, c, i, j):
    w = W(s)
    _, ce, z, a = s["discMsgs"][j][i][0]
    w["discMsgs"] = _clearslot(s["discMsgs"], j, i)
    rec = (ce, z, a)
    if s["state"][i] == LEADING:
        if _current(s, j, rec) and can_join(s, c, i, j):
            _join(w, i, j)
            _reset_internals(w, j, c)
    elif s["state"][i] == LOOKING and s["decision"][i] == i and s["proposedEpoch"][i] is not None:
        got = frozenset(p for p in s["ackepochRecv"][i] if p[0] != j) | {(j, rec)}
        w.setn("ackepochRecv", i, got)
        if 1 + len(got) == c.quorum:
            followers = tuple(sorted(k for k, _ in got))
            e = s["proposedEpoch"][i]
            if (all(_current(s, k, r) for k, r in got) and can_establish(s, c, i, followers)
                    and e == new_epoch(s, (i, *followers))):
                _establish(w, i, followers, e)
                for k in (i, *followers):
                    _reset_internals(w, k, c)
    return w.ch


_INTERNALS = ("currentVote", "recvVotes", "decision", "connecting", "proposedEpoch",
              "ackepochRecv", "followerEpoch")
_D_READS = frozenset({"alive", "discMsgs"})
_LINK = frozenset({"alive", "partition"})

ConnectAndFollowerSendFOLLOWERINFO = ActionDef(
    "ConnectAndFollowerSendFOLLOWERINFO", "Discovery", (("i", NODES),), _connect_guard, _connect_update,
    reads=frozenset({"alive", "state", "decision", "followerEpoch", "partition"}),
    writes={"discMsgs": frozenset({"discMsgs", "decision", "acceptedEpoch"}),
            "followerEpoch": frozenset({"followerEpoch"})})

LeaderProcessFOLLOWERINFO = ActionDef(
    "LeaderProcessFOLLOWERINFO", "Discovery", (("i", NODES), ("j", NODES)),
    _head_is("FOLLOWERINFO"), _finfo_update,
    reads=_D_READS,
    writes={"discMsgs": frozenset({"discMsgs", "state", "acceptedEpoch", "decision", "connecting",
                                   "proposedEpoch"}) | _LINK,
            "connecting": frozenset({"connecting", "discMsgs", "state", "decision"}),
            "proposedEpoch": frozenset({"proposedEpoch", "connecting", "acceptedEpoch", "discMsgs",
                                        "state", "decision"})},
    candidates=_msg_from("discMsgs"))

FollowerProcessLEADERINFO = ActionDef(
    "FollowerProcessLEADERINFO", "Discovery", (("i", NODES), ("j", NODES)),
    _head_is("LEADERINFO"), _linfo_update,
    reads=_D_READS,
    writes={"discMsgs": frozenset({"discMsgs", "state", "decision", "followerEpoch", "acceptedEpoch",
                                   "currentEpoch", "history"}) | _LINK,
            "decision": frozenset({"decision", "discMsgs", "state", "followerEpoch", "acceptedEpoch"}),
            "followerEpoch": frozenset({"followerEpoch", "discMsgs", "state", "decision", "acceptedEpoch"})},
    candidates=_msg_from("discMsgs"))

_ACKEPOCH_DEPS = frozenset({"discMsgs", "state", "decision", "proposedEpoch", "ackepochRecv",
                            "currentEpoch", "history", "acceptedEpoch", "learners", "syncPending"}) | _LINK

LeaderProcessACKEPOCH = ActionDef(
    "LeaderProcessACKEPOCH", "Discovery", (("i", NODES), ("j", NODES)),
    _head_is("ACKEPOCH"), _ackepoch_update,
    reads=_D_READS,
    writes={**{v: _ACKEPOCH_DEPS for v in ESTABLISH_WRITES},
            **{v: _ACKEPOCH_DEPS for v in _INTERNALS},
            "discMsgs": frozenset({"discMsgs"})},
    candidates=_msg_from("discMsgs"))

DISCOVERY_VARS = {
    "discMsgs": channels,
    "connecting": per_node(frozenset()),
    "proposedEpoch": per_node(None),
    "ackepochRecv": per_node(frozenset()),
    "followerEpoch": per_node(None),
}

DISCOVERY_BASELINE = ModuleSpec(
    "Discovery", "baseline",
    (ConnectAndFollowerSendFOLLOWERINFO, LeaderProcessFOLLOWERINFO, FollowerProcessLEADERINFO,
     LeaderProcessACKEPOCH),
    {**DISCOVERY_VARS, **{v: CORE_INIT[v] for v in ED_VARS}},
    description="followers connect, the leader proposes a new epoch and establishes at quorum",
)

__all__ = ["COARSE", "ELECTION_BASELINE", "DISCOVERY_BASELINE", "CORE_INIT", "can_establish",
           "can_join", "new_epoch", "DISCOVERY", "PAIRS"]
