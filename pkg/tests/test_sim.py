import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgcheck.sim import (BugFlags, Scenario, SimError, load_scenario, new_cluster, observe, save_scenario,
                         step)
from simutil import drain, ev, settle


def test_fresh_cluster():
    o = observe(new_cluster())
    assert o.currentEpoch == o.acceptedEpoch == (0, 0, 0)
    assert o.history == ((), (), ()) and o.state == ("LOOKING",) * 3


def test_no_fault_run_commits_everywhere():
    cl = settle(new_cluster())
    o = observe(cl)
    assert o.state == ("FOLLOWING", "FOLLOWING", "LEADING")
    assert o.zabState == ("BROADCAST",) * 3
    assert cl.apply(ev("client-propose", 2))
    drain(cl)
    o = observe(cl)
    assert o.history[0] == o.history[1] == o.history[2] == ((1, 1, 1),)
    assert o.lastCommitted == (1, 1, 1)


def test_observe_is_idempotent():
    cl = settle(new_cluster())
    assert observe(cl) == observe(cl)


def test_quiesced_cluster_only_allows_faults_and_clients():
    cl = settle(new_cluster())
    assert cl.enabled_events() == []
    assert cl.can_apply(ev("crash", 0)) and cl.can_apply(ev("partition", 0, 1))
    assert cl.can_apply(ev("client-propose", 2)) and cl.can_apply(ev("client-read", 1))
    assert not cl.can_apply(ev("client-propose", 0))


def test_heal_without_partition_is_not_enabled():
    cl = new_cluster()
    before = observe(cl)
    assert not cl.apply(ev("heal", 0, 1))
    assert observe(cl) == before


def test_step_rejects_disabled_and_malformed_events():
    cl = new_cluster()
    with pytest.raises(SimError):
        step(cl, ev("restart", 0))
    with pytest.raises(SimError):
        cl.apply(ev("teleport", 0))
    with pytest.raises(SimError):
        cl.apply(ev("deliver-message", 0, 1, payload="pigeon"))


def test_step_does_not_mutate_its_input():
    cl = new_cluster()
    before = observe(cl)
    after = step(cl, ev("run-task-step", 2, "election"))
    assert observe(cl) == before and after.events == cl.events + 1


def _sync_node1(flags, stop=None):
    """Leader 2 with follower 0 and one txn, then node 1 joins; returns node 1's marks."""
    cl = new_cluster(Scenario(3, flags))
    cl.apply(ev("run-task-step", 2, "election"))
    drain(cl)
    cl.apply(ev("client-propose", 2))
    drain(cl)
    cl.apply(ev("run-task-step", 1, "election"))
    for _ in range(10_000):
        mine = [m[0] for m in cl.marks if m[0].startswith("nl-") and m[1] == 1]
        if stop is not None and stop in mine:
            return cl, mine
        events = cl.enabled_events()
        if not events:
            return cl, mine
        cl.apply(events[0])
    raise AssertionError("cluster did not quiesce")


def test_newleader_history_before_epoch_when_fixed():
    cl, marks = _sync_node1(BugFlags())
    assert marks.index("nl-history") < marks.index("nl-epoch") < marks.index("nl-ack")
    assert observe(cl).history[1] == ((1, 1, 1),)


def test_newleader_epoch_first_with_zk4643():
    cl, marks = _sync_node1(BugFlags.of("zk4643"), stop="nl-epoch")
    assert "nl-history" not in marks
    cl.apply(ev("crash", 1))
    o = observe(cl)
    assert o.currentEpoch[1] == 1 and o.history[1] == ()
    assert o.history[2] == ((1, 1, 1),)


def test_scenario_round_trip(tmp_path):
    sc = Scenario(3, BugFlags.of("zk4394", "zk3023"), (ev("run-task-step", 2, "election"), ev("crash", 0)))
    save_scenario(tmp_path / "s.json", sc)
    assert load_scenario(tmp_path / "s.json") == sc
    assert json.loads((tmp_path / "s.json").read_text())["flags"] == ["zk3023", "zk4394"]


def test_unknown_flag():
    with pytest.raises(ValueError):
        BugFlags.of("zk0000")


FAULTS = st.sampled_from([("crash", 0), ("crash", 1), ("crash", 2), ("restart", 0), ("restart", 1),
                          ("restart", 2), ("partition", 0, 2), ("heal", 0, 2), ("client-propose", 2),
                          ("run-task-step", 0, "election"), ("run-task-step", 1, "election"),
                          ("run-task-step", 2, "election")])


def _walk(choices, flags):
    cl = new_cluster(Scenario(3, flags))
    trail = []
    for pick, fault in choices:
        events = cl.enabled_events()
        if fault is None and not events:
            continue
        e = ev(*fault) if fault is not None else events[pick % len(events)]
        if cl.apply(e):
            trail.append(e)
    return cl, trail


walks = st.lists(st.tuples(st.integers(0, 50), st.none() | FAULTS), max_size=60)
flag_sets = st.sets(st.sampled_from(BugFlags.NAMES)).map(lambda s: BugFlags.of(*s))


@settings(max_examples=40)
@given(walks, flag_sets)
def test_event_application_is_deterministic(choices, flags):
    a, trail = _walk(choices, flags)
    b = new_cluster(Scenario(3, flags))
    for e in trail:
        b = step(b, e)
    assert observe(a) == observe(b)
    assert json.dumps(repr(observe(a))) == json.dumps(repr(observe(b)))


@settings(max_examples=40)
@given(walks, st.integers(0, 2))
def test_crash_keeps_only_persisted_fields(choices, victim):
    cl, _ = _walk(choices, BugFlags())
    if not cl.nodes[victim].alive:
        cl.apply(ev("restart", victim))
    n = cl.nodes[victim]
    kept = (n.current_epoch, n.accepted_epoch, list(n.log), n.committed)
    cl.apply(ev("crash", victim))
    cl.apply(ev("restart", victim))
    n = cl.nodes[victim]
    assert (n.current_epoch, n.accepted_epoch, list(n.log), n.committed) == kept
    assert n.role == "LOOKING" and not n.sync_q and not n.commit_q and not n.learners
    assert all(not q for (a, b), q in cl.chan["peer"].items() if victim in (a, b))
