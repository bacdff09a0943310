import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgcheck.algebra import Constants, compose_modules
from mgcheck.bugs import hunt
from mgcheck.conformance import (CONFIRM_VARS, BugFlags, UnmappedAction, check_mappable, conformance_check,
                                 confirm_violation, default_flags, mark_known_buggy, replay)
from mgcheck.kernel import Trace, random_walk
from mgcheck.zab import build_mspec, protocol_spec, sync

C = Constants(3, 2, 1, 1)
IMPROVED = protocol_spec(True, C)


def test_empty_trace_is_conformant():
    res = replay(IMPROVED, Trace(IMPROVED.init[0]))
    assert res.conformant and res.steps_replayed == 0 and res.events == []


@settings(max_examples=25)
@given(st.integers(0, 2 ** 31 - 1))
def test_improved_walks_replay_conformantly(seed):
    (t,) = random_walk(IMPROVED, seed, 30)
    res = replay(IMPROVED, t)
    assert res.conformant, res.report()


@pytest.mark.parametrize("level", [1, 2, 3])
def test_mixed_grained_walks_replay_conformantly(level):
    # coarse Synchronization steps fold away the UPTODATE ack, so compare node-local state
    spec = build_mspec(level, C)
    for seed in range(15):
        (t,) = random_walk(spec, 1000 * level + seed, 30)
        res = replay(spec, t, compare=CONFIRM_VARS)
        assert res.conformant, res.report()


def test_granularity_flags():
    assert default_flags(build_mspec(1, C)) == BugFlags.of("zk4394")
    assert default_flags(build_mspec(3, C)) == BugFlags.everything()
    assert default_flags(IMPROVED) == BugFlags()


def test_coarse_election_actions_are_unmapped():
    spec = build_mspec("baseline", C)
    (t,) = random_walk(spec, 0, 5)
    assert len(t) == 5
    with pytest.raises(UnmappedAction):
        check_mappable(spec, t)


def test_mark_known_buggy():
    prune = mark_known_buggy(["C-ZK4394"])
    assert prune(None, None, None, ["C-ZK4394-CommitWithoutPendingProposal"])
    assert not prune(None, None, None, ["P1-SingleLeader"])
    assert not prune(None, None, None, [])
    assert not mark_known_buggy([])(None, None, None, ["C-ZK4394-CommitWithoutPendingProposal"])


def test_dropped_uptodate_ack_is_a_value_discrepancy():
    base = protocol_spec(True, C)
    mods = [sync.without_uptodate_ack(m) if m.name == "Synchronization" else m for m in base.modules]
    spec = compose_modules(mods, C)
    rep = conformance_check(spec, traces=10, max_steps=30, seed=0)
    assert rep.value_discrepancies
    d = rep.value_discrepancies[0]
    assert "msgs" in d.variables and "value discrepancy" in d.report()


def test_reports_are_reproducible():
    a = conformance_check(IMPROVED, traces=5, max_steps=20, seed=7)
    b = conformance_check(IMPROVED, traces=5, max_steps=20, seed=7)
    assert a.report() == b.report() and a.steps == b.steps


def test_commit_without_pending_proposal_is_confirmed():
    h = hunt("ZK-4394", Constants(3, 2, 1, 0), time_limit=120)
    assert h.found and h.confirmed, h.summary()
    again = confirm_violation(h.spec, h.trace, "C-ZK4394")
    assert again.confirmed


def test_confirmation_fails_when_the_bug_is_fixed():
    h = hunt("ZK-4394", Constants(3, 2, 1, 0), time_limit=120)
    conf = confirm_violation(h.spec, h.trace, "C-ZK4394", flags=BugFlags())
    assert not conf.confirmed
