"""Protocol-level safety predicates and code-level error-path predicates.

Protocol invariants (P1..P10) are state predicates except epoch
monotonicity, which compares consecutive states.  Code-level invariants
fire only on the transitions of the action that takes the error path.
"""

from __future__ import annotations

from ..kernel import Invariant
from .common import BROADCAST, FOLLOWING, LEADING, SYNCHRONIZATION, zxid


def _committed(s, i):
    return s["history"][i][:s["lastCommitted"][i]]


def _prefix(a, b) -> bool:
    return len(a) <= len(b) and b[:len(a)] == a


def single_leader(s, c):
    seen = {}
    for i in c.node_ids:
        if s["state"][i] == LEADING:
            e = s["acceptedEpoch"][i]
            if e in seen:
                return False
            seen[e] = i
    return True


def epoch_monotone(pre, inst, post, c):
    return all(post["currentEpoch"][i] >= pre["currentEpoch"][i]
               and post["acceptedEpoch"][i] >= pre["acceptedEpoch"][i] for i in c.node_ids)


def epoch_order(s, c):
    return all(s["currentEpoch"][i] <= s["acceptedEpoch"][i] for i in c.node_ids)


def history_order(s, c):
    for h in s["history"]:
        zs = [zxid(e) for e in h]
        if any(a >= b for a, b in zip(zs, zs[1:])):
            return False
    return True


def committed_agreement(s, c):
    cs = [_committed(s, i) for i in c.node_ids]
    for a in range(len(cs)):
        for b in range(a + 1, len(cs)):
            n = min(len(cs[a]), len(cs[b]))
            if cs[a][:n] != cs[b][:n]:
                return False
    return True


def leader_completeness(s, c):
    g = s["ghostCommitted"]
    return all(_prefix(g, s["history"][i]) for i in c.node_ids
               if s["state"][i] == LEADING and s["zabState"][i] == BROADCAST)


def total_order(s, c):
    g = s["ghostCommitted"]
    return all(_prefix(_committed(s, i), g) for i in c.node_ids)


def primary_order(s, c):
    for h in s["history"]:
        last = {}
        for e, k, _ in h:
            if k != last.get(e, 0) + 1:
                return False
            last[e] = k
    return True


def integrity(s, c):
    if "ghostProposed" not in s:
        return True
    p = s["ghostProposed"]
    return all(e in p for i in c.node_ids for e in _committed(s, i))


def commit_bound(s, c):
    return all(0 <= s["lastCommitted"][i] <= len(s["history"][i]) for i in c.node_ids)


PROTOCOL = (
    Invariant("P1-SingleLeaderPerEpoch", single_leader,
              description="at most one established leader per epoch"),
    Invariant("P2-EpochMonotonicity", epoch_monotone, kind="transition",
              description="currentEpoch and acceptedEpoch never decrease"),
    Invariant("P3-CurrentEpochBound", epoch_order, description="currentEpoch <= acceptedEpoch"),
    Invariant("P4-HistoryOrder", history_order, description="history zxids strictly increase"),
    Invariant("P5-CommittedPrefixAgreement", committed_agreement,
              description="committed prefixes agree on their common length"),
    Invariant("P6-LeaderCompleteness", leader_completeness,
              description="a broadcasting leader's history contains every committed transaction"),
    Invariant("P7-TotalOrder", total_order,
              description="every committed prefix is a prefix of the global commit order"),
    Invariant("P8-PrimaryOrder", primary_order,
              description="within an epoch, history counters are consecutive from 1"),
    Invariant("P9-Integrity", integrity, description="only proposed transactions are committed"),
    Invariant("P10-CommitIndexBound", commit_bound, description="0 <= lastCommitted <= |history|"),
)


# -- code-level error paths ---------------------------------------------------------

def _npe_free(pre, inst, post, c):
    return bool(pre["packetsNotCommitted"][inst.args["i"]])


def _trunc_keeps_committed(pre, inst, post, c):
    i = inst.args["i"]
    kept = post["history"][i] + tuple(e for e, _ in post["syncPackets"][i])
    return _prefix(_committed(pre, i), kept)


def _quorum_persisted(pre, inst, post, c):
    i = inst.args["i"]
    if not (pre["zabState"][i] == SYNCHRONIZATION and post["zabState"][i] == BROADCAST):
        return True
    h = post["history"][i]
    return all(_prefix(h, post["history"][k]) for k in post["ackld"][i])


def _ack_attributed(pre, inst, post, c):
    a = inst.args
    return a["j"] in pre["ackld"][a["i"]]


def _log_within_leader(pre, inst, post, c):
    i = inst.args["i"]
    if post["state"][i] != FOLLOWING:
        return True
    return _prefix(post["history"][i], post["history"][post["leaderOf"][i]])


def _follower_committed(pre, inst, post, c):
    j = inst.args["j"]
    return "committedRequests" not in pre or not pre["committedRequests"][j]


CODE = {
    "ZK-4394": Invariant(
        "C-ZK4394-CommitWithoutPendingProposal", _npe_free, kind="transition",
        triggers=frozenset({"FollowerProcessCOMMITInSync"}), level="code",
        description="a COMMIT during sync finds no pending proposal (null dereference path)"),
    "ZK-4643": Invariant(
        "C-ZK4643-TruncateCommitted", _trunc_keeps_committed, kind="transition",
        triggers=frozenset({"FollowerProcessSyncMessage"}), level="code",
        description="a sync message discards transactions the follower had committed"),
    "ZK-4646": Invariant(
        "C-ZK4646-ServeBeforeQuorumPersisted", _quorum_persisted, kind="transition",
        triggers=frozenset({"LeaderProcessACKLD"}), level="code",
        description="the leader starts serving before a quorum has persisted its history"),
    "ZK-4685": Invariant(
        "C-ZK4685-UnexpectedAckInSync", _ack_attributed, kind="transition",
        triggers=frozenset({"LeaderProcessACK"}), level="code",
        description="a proposal ACK arrives before the follower's NEWLEADER ACK"),
    "ZK-4712": Invariant(
        "C-ZK4712-StaleLogAfterSync", _log_within_leader, kind="transition",
        triggers=frozenset({"FollowerSyncProcessorLogRequest"}), level="code",
        description="the sync thread logs a transaction its current leader does not have"),
    "ZK-3023": Invariant(
        "C-ZK3023-UptodateAckBeforeCommit", _follower_committed, kind="transition",
        triggers=frozenset({"LeaderProcessACKUPTODATE"}), level="code",
        description="the leader handles the UPTODATE ACK before the follower committed"),
}

# which code-level predicates each Synchronization granularity carries
CODE_BY_GRANULARITY = {
    "protocol": (),
    "baseline": ("ZK-4394",),
    "fine-atomicity": ("ZK-4394", "ZK-4643", "ZK-4646"),
    "fine-atomicity+concurrency": ("ZK-4394", "ZK-4643", "ZK-4646", "ZK-4685", "ZK-4712", "ZK-3023"),
    "improved": (),
}

BUG_IDS = tuple(sorted(CODE))


def code_invariants(granularity: str) -> tuple:
    return tuple(CODE[b] for b in CODE_BY_GRANULARITY.get(granularity, ()))


def invariant_suite(sync_granularity: str | None = None, include_code: bool = True) -> list:
    """Protocol invariants plus the code-level ones for a Synchronization granularity.

    With ``sync_granularity=None`` every code-level predicate is included.
    """
    out = list(PROTOCOL)
    if include_code:
        out += list(CODE.values()) if sync_granularity is None else list(code_invariants(sync_granularity))
    return out
