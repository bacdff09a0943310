"""Shared vocabulary of the Zab model: variables, helpers, resets."""

from __future__ import annotations

from ..algebra import Constants

LOOKING, LEADING, FOLLOWING = "LOOKING", "LEADING", "FOLLOWING"
ELECTION, DISCOVERY, SYNCHRONIZATION, BROADCAST = "ELECTION", "DISCOVERY", "SYNCHRONIZATION", "BROADCAST"
INITIAL, RUNNING = "INITIAL", "RUNNING"

ZERO = (0, 0)


def per_node(value):
    return lambda c: (value,) * c.nodes


def channels(c: Constants):
    return tuple(tuple(() for _ in range(c.nodes)) for _ in range(c.nodes))


def NODES(c):
    return c.node_ids


def PAIRS(c):
    return tuple((i, j) for i in c.node_ids for j in c.node_ids if i != j)


# -- entries and zxids ------------------------------------------------------
# a history entry is (epoch, counter, payload); its zxid is (epoch, counter)

def zxid(entry) -> tuple:
    return entry[0], entry[1]


def last_zxid(history) -> tuple:
    return zxid(history[-1]) if history else ZERO


def zxids(history) -> list:
    return [zxid(e) for e in history]


def index_of(history, z) -> int:
    """1-based position of zxid ``z`` in ``history`` (0 if absent)."""
    for k, e in enumerate(history, 1):
        if zxid(e) == z:
            return k
    return 0


def vote_of(s, i) -> tuple:
    """FLE ordering key: (currentEpoch, last zxid, id)."""
    return (s["currentEpoch"][i], last_zxid(s["history"][i]), i)


# -- tuple helpers ------------------------------------------------------------

def upd(t: tuple, i: int, v) -> tuple:
    return t[:i] + (v,) + t[i + 1:]


def head(ch, i, j):
    q = ch[i][j]
    return q[0] if q else None


def push(ch, i, j, m):
    return upd(ch, i, upd(ch[i], j, ch[i][j] + (m,)))


def pop(ch, i, j):
    return upd(ch, i, upd(ch[i], j, ch[i][j][1:]))


def clear_node(ch, i):
    n = len(ch)
    out = []
    for a in range(n):
        row = ch[a]
        if a == i:
            row = tuple(() for _ in range(n))
        else:
            row = upd(row, i, ())
        out.append(row)
    return tuple(out)


def clear_pair(ch, i, j):
    ch = upd(ch, i, upd(ch[i], j, ()))
    return upd(ch, j, upd(ch[j], i, ()))


def linked(s, i, j) -> bool:
    return s["alive"][i] and s["alive"][j] and frozenset((i, j)) not in s["partition"]


def nonempty_pairs(var):
    """Candidate bindings (i receives from j) for channel ``var``."""
    def gen(s, c):
        ch = s[var]
        for j in range(c.nodes):
            row = ch[j]
            for i in range(c.nodes):
                if row[i]:
                    yield {"i": i, "j": j}
    return gen


# -- writer -------------------------------------------------------------------

class W:
    """Accumulates changes over a state; reads see pending writes."""

    __slots__ = ("s", "ch")

    def __init__(self, s):
        self.s = s
        self.ch = {}

    def __getitem__(self, var):
        if var in self.ch:
            return self.ch[var]
        return self.s[var]

    def __contains__(self, var):
        return var in self.s

    def __setitem__(self, var, value):
        self.ch[var] = value

    def setn(self, var, i, value):
        self.ch[var] = upd(self[var], i, value)


# -- volatile state ------------------------------------------------------------

# per-node volatile variables and their reset values; persisted: currentEpoch,
# acceptedEpoch, history, lastCommitted
def _empty_votes(n):
    return (None,) * n


VOLATILE = {
    "state": LOOKING,
    "zabState": ELECTION,
    "leaderOf": None,
    "learners": frozenset(),
    "syncPending": frozenset(),
    "forwarding": frozenset(),
    "ackld": frozenset(),
    "proposalAcks": frozenset(),
    "syncPackets": (),
    "packetsNotCommitted": (),
    "committedRequests": (),
    "uptodateAcked": frozenset(),
    "servingState": INITIAL,
    # baseline election / discovery internals
    "currentVote": None,
    "recvVotes": None,  # reset to a tuple of Nones
    "decision": None,
    "connecting": frozenset(),
    "proposedEpoch": None,
    "ackepochRecv": frozenset(),
    "followerEpoch": None,
}
# survives a shutdown (not a crash): the sync thread's queue keeps its requests
QUEUE_VARS = ("queuedRequests",)
CHANNEL_VARS = ("msgs", "electionMsgs", "discMsgs")

RESET_VARS = frozenset(VOLATILE) | frozenset(QUEUE_VARS) | frozenset(CHANNEL_VARS)


def _reset(w: W, i: int, crash: bool, n: int):
    for var, val in VOLATILE.items():
        if var not in w:
            continue
        if var == "recvVotes":
            val = _empty_votes(n)
        if w[var][i] != val:
            w.setn(var, i, val)
    if crash:
        for var in QUEUE_VARS:
            if var in w and w[var][i]:
                w.setn(var, i, ())
    for var in CHANNEL_VARS:
        if var in w:
            w[var] = clear_node(w[var], i)


def shutdown(w: W, i: int, c: Constants, crash: bool = False):
    """Node ``i`` leaves its ensemble (returns to LOOKING); cascades.

    A leader shutting down takes its followers with it; a follower leaving
    is dropped by its leader, which shuts down when it loses its quorum.
    """
    if "state" not in w:
        _reset(w, i, crash, c.nodes)
        return
    role = w["state"][i]
    if role == LEADING:
        followers = [j for j in range(c.nodes) if j != i and w["leaderOf"][j] == i
                     and w["state"][j] == FOLLOWING]
        _reset(w, i, crash, c.nodes)
        for j in followers:
            _reset(w, j, False, c.nodes)
    elif role == FOLLOWING:
        ldr = w["leaderOf"][i]
        _reset(w, i, crash, c.nodes)
        if ldr is not None and w["state"][ldr] == LEADING:
            drop_learner(w, ldr, i, c)
    else:
        _reset(w, i, crash, c.nodes)


def drop_learner(w: W, ldr: int, j: int, c: Constants):
    for var in ("learners", "forwarding", "ackld", "uptodateAcked"):
        if var in w and j in w[var][ldr]:
            w.setn(var, ldr, w[var][ldr] - {j})
    if "syncPending" in w:
        sp = w["syncPending"][ldr]
        keep = frozenset(p for p in sp if p[0] != j)
        if keep != sp:
            w.setn("syncPending", ldr, keep)
    if 1 + len(w["learners"][ldr]) < c.quorum:
        shutdown(w, ldr, c)


# variables touched by shutdown cascades (for action metadata)
SHUTDOWN_READS = frozenset({"state", "leaderOf", "learners"})
SHUTDOWN_WRITES = RESET_VARS
