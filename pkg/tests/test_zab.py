from hypothesis import given, settings
from hypothesis import strategies as st

from mgcheck.algebra import Constants
from mgcheck.kernel import ActionInstance, Invariant, apply, bfs_check, enumerate_enabled, random_walk
from mgcheck.zab import PROTOCOL, build_mspec, protocol_spec
from mgcheck.zab.common import ZERO, zxid

HISTORY_ORDER = next(inv for inv in PROTOCOL if inv.id == "P4-HistoryOrder")

INV = {i.id.split("-")[0]: i for i in PROTOCOL}


def ed(i, q):
    return ActionInstance("ElectionAndDiscovery", (("i", i), ("q", q)))


def run(spec, *insts):
    s = spec.init[0]
    for inst in insts:
        s = apply(spec, inst, s)
    return s


def act(name, **b):
    return ActionInstance(name, tuple(sorted(b.items())))


def test_initial_enablement_of_coarse_spec():
    # votes are (epoch 0, zxid 0, id): only a higher id can lead, one follower suffices
    spec = build_mspec(1, Constants(3, 2, 0, 0))
    got = set(enumerate_enabled(spec, spec.init[0]))
    assert got == {ed(1, (0,)), ed(2, (0,)), ed(2, (1,))}


def test_initial_enablement_with_fault_budget():
    spec = build_mspec(1, Constants(3, 2, 1, 1))
    names = sorted(i.name for i in enumerate_enabled(spec, spec.init[0]))
    assert names.count("Crash") == 3 and names.count("PartitionStart") == 3
    assert names.count("ElectionAndDiscovery") == 3


def test_coarse_step_establishes_an_ensemble():
    spec = build_mspec(1, Constants(3, 2, 0, 0))
    s = run(spec, ed(2, (0,)))
    assert s["state"] == ("FOLLOWING", "LOOKING", "LEADING")
    assert [s["zabState"][k] for k in (0, 2)] == ["SYNCHRONIZATION"] * 2
    assert s["acceptedEpoch"] == (1, 0, 1) and s["leaderOf"] == (2, None, 2)
    assert s["learners"][2] == {0} and s["syncPending"][2] == {(0, ZERO)}


def _sync_to_broadcast(spec):
    """Leader 2 with follower 0, then a proposal, then node 1 joins."""
    s = run(spec, ed(2, (0,)), act("LeaderSyncFollower", i=2, j=0))
    return s


def _find(spec, pred, max_states=200_000):
    hit = Invariant("probe", lambda s, c: not pred(s))
    r = bfs_check(spec, [hit], stop="first")
    assert r.violations, "probe state not reachable"
    return r.violations[0][1]


def _newleader_pending(s):
    for i in range(3):
        j = s["leaderOf"][i]
        if j is None or s["state"][i] != "FOLLOWING":
            continue
        q = s["msgs"][j][i]
        if q and q[0][0] == "NEWLEADER" and s["syncPackets"][i]:
            return True
    return False


def test_baseline_newleader_is_one_step():
    spec = build_mspec(1, Constants(3, 1, 0, 0))
    t = _find(spec, _newleader_pending)
    pre = t.last
    i = next(k for k in range(3) if pre["syncPackets"][k] and pre["leaderOf"][k] is not None)
    j = pre["leaderOf"][i]
    msg = pre["msgs"][j][i][0]
    post = apply(spec, act("FollowerProcessNEWLEADER", i=i, j=j), pre)
    # (1) epoch adopted, (2) synced packets appended, (3) ACK queued: all at once
    expected_hist = pre["history"][i] + tuple(e for e, _ in pre["syncPackets"][i])
    assert post["currentEpoch"][i] == msg[1]
    assert post["history"][i] == expected_hist
    assert post["msgs"][i][j] == pre["msgs"][i][j] + (("ACK", (msg[1], 0)),)
    assert post["msgs"][j][i] == pre["msgs"][j][i][1:]
    assert post["syncPackets"][i] == ()


def _epoch_ahead_of_log(pre, inst, post, c):
    # a step raised a follower's epoch while its synced packets are still unlogged
    return not any(post["currentEpoch"][i] > pre["currentEpoch"][i] and post["syncPackets"][i]
                   for i in range(c.nodes))


def test_fine_atomicity_reaches_epoch_ahead_of_log():
    c = Constants(3, 1, 1, 0)
    probe = Invariant("probe", _epoch_ahead_of_log, kind="transition")
    r = bfs_check(build_mspec(2, c), [probe], stop="first")
    assert r.violations
    t = r.violations[0][1]
    assert t.steps[-1][0].name == "FollowerProcessNEWLEADERUpdateEpoch"
    pre = t.last
    i = t.steps[-1][0].args["i"]
    post = apply(build_mspec(2, c), act("Crash", i=i), pre)
    assert post["currentEpoch"][i] == pre["currentEpoch"][i] > 0
    assert post["history"][i] == pre["history"][i]  # the synced packets are lost
    r = bfs_check(build_mspec(1, c), [probe], stop="complete")
    assert r.outcome == "complete" and not r.violations


def test_baseline_broadcast_commits_identically():
    spec = build_mspec(1, Constants(3, 1, 0, 0))
    s = run(spec,
            ed(2, (0,)), act("LeaderSyncFollower", i=2, j=0),
            act("FollowerProcessSyncMessage", i=0, j=2), act("FollowerProcessNEWLEADER", i=0, j=2),
            act("LeaderProcessACKLD", i=2, j=0), act("FollowerProcessUPTODATE", i=0, j=2),
            act("LeaderProposeRequest", i=2), act("FollowerProcessPROPOSAL", i=0, j=2),
            act("LeaderProcessACK", i=2, j=0), act("FollowerProcessCOMMIT", i=0, j=2))
    entry = (1, 1, 1)
    assert s["history"][0] == s["history"][2] == (entry,)
    assert s["lastCommitted"][0] == s["lastCommitted"][2] == 1
    assert s["ghostCommitted"] == (entry,)
    assert s["currentEpoch"][0] == s["currentEpoch"][2] == 1
    assert s["zabState"][0] == s["zabState"][2] == "BROADCAST"


def _newleader_head(s):
    return any(s["leaderOf"][i] is not None and s["state"][i] == "FOLLOWING"
               and s["msgs"][s["leaderOf"][i]][i][:1]
               and s["msgs"][s["leaderOf"][i]][i][0][0] == "NEWLEADER" for i in range(3))


def test_protocol_newleader_is_atomic():
    spec = protocol_spec(False, Constants(3, 1, 0, 0))
    t = _find(spec, _newleader_head)
    pre = t.last
    i = next(k for k in range(3) if pre["leaderOf"][k] is not None and pre["state"][k] == "FOLLOWING"
             and pre["msgs"][pre["leaderOf"][k]][k][:1])
    j = pre["leaderOf"][i]
    _, e, hist = pre["msgs"][j][i][0]
    post = apply(spec, act("FollowerProcessNEWLEADER", i=i, j=j), pre)
    assert post["currentEpoch"][i] == e and post["history"][i] == hist


def test_improved_updates_history_before_epoch():
    spec = protocol_spec(True, Constants(3, 1, 0, 0))
    hit = Invariant("probe", lambda pre, inst, post, c: False, kind="transition",
                    triggers=frozenset({"FollowerProcessNEWLEADERUpdateHistory"}))
    r = bfs_check(spec, [hit], stop="first")
    (_, t), = r.violations
    pre, post = t.states[-2], t.last
    assert post["currentEpoch"] == pre["currentEpoch"]


def test_single_leader_predicate():
    spec = build_mspec(1, Constants(3, 1, 0, 0))
    s = spec.init[0].replace({"state": ("LEADING", "LEADING", "LOOKING"), "acceptedEpoch": (1, 1, 0)})
    assert not INV["P1"].check(s, spec.constants)
    assert all(inv.check(spec.init[0], spec.constants) for inv in PROTOCOL if inv.kind == "state")


SPECS = {
    "baseline": build_mspec("baseline", Constants(3, 2, 1, 1)),
    "m1": build_mspec(1, Constants(3, 2, 1, 1)),
    "m3": build_mspec(3, Constants(3, 2, 1, 1)),
    "improved": protocol_spec(True, Constants(3, 2, 2, 1)),
}


@settings(max_examples=30)
@given(st.sampled_from(sorted(SPECS)), st.integers(0, 100_000))
def test_node_variable_invariants_along_walks(name, seed):
    spec = SPECS[name]
    (t,) = random_walk(spec, seed, 60)
    c = spec.constants
    prev = t.init
    for inst, s in t.steps:
        for i in c.node_ids:
            assert s["currentEpoch"][i] >= prev["currentEpoch"][i]
            assert s["currentEpoch"][i] <= s["acceptedEpoch"][i]
            assert 0 <= s["lastCommitted"][i] <= len(s["history"][i])
        # code-level specs may log out of order; the history invariant must notice
        ordered = all([e[:2] for e in h] == sorted({e[:2] for e in h}) for h in s["history"])
        assert ordered or not HISTORY_ORDER.check(s, c)
        prev = s


@settings(max_examples=30)
@given(st.sampled_from(["baseline", "improved"]), st.integers(0, 100_000))
def test_committed_prefixes_agree_along_walks(name, seed):
    spec = SPECS[name]
    (t,) = random_walk(spec, seed, 60)
    for s in t.states:
        assert INV["P5"].check(s, spec.constants)
        assert INV["P10"].check(s, spec.constants)


@settings(max_examples=20)
@given(st.integers(0, 100_000))
def test_improved_spec_keeps_every_protocol_invariant(seed):
    spec = SPECS["improved"]
    (t,) = random_walk(spec, seed, 60)
    c = spec.constants
    for (inst, s), pre in zip(t.steps, t.states):
        for inv in PROTOCOL:
            ok = inv.check(pre, inst, s, c) if inv.kind == "transition" else inv.check(s, c)
            assert ok, inv.id


def test_quorum_commit_bookkeeping():
    # an ACK only extends the global commit order once a quorum of learners acked
    spec = build_mspec(1, Constants(3, 2, 0, 0))

    def check(pre, inst, post, c):
        fresh = post["ghostCommitted"][len(pre["ghostCommitted"]):]
        if inst.name != "LeaderProcessACK" or not fresh:
            return True
        i, j = inst.args["i"], inst.args["j"]
        acks = pre["proposalAcks"][i] | {(pre["msgs"][j][i][0][1], j)}
        members = pre["learners"][i]
        return all(1 + len({k for z, k in acks if z == zxid(e) and k in members}) >= c.quorum
                   for e in fresh)

    inv = Invariant("QuorumCommit", check, kind="transition")
    r = bfs_check(spec, [inv], stop="complete")
    assert r.outcome == "complete" and not r.violations
