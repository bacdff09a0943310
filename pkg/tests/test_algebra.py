import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgcheck.algebra import (CompositionError, CompositionPlan, Constants, Library, ModuleSpec, compose,
                             compose_modules, list_variants, load_plan, save_plan)
from mgcheck.kernel import ActionDef
from mgcheck.zab import LIBRARY, PRESETS, build_mspec, preset_plan

ELECTION_DISCOVERY = {"FLEStartElection", "FLEHandleNotmsg", "FLEReplyNotmsg", "FLEWaitNewNotmsg",
                      "ConnectAndFollowerSendFOLLOWERINFO", "LeaderProcessFOLLOWERINFO",
                      "FollowerProcessLEADERINFO", "LeaderProcessACKEPOCH"}


def names(spec):
    return {a.name for a in spec.actions}


def test_all_baseline_plan_is_the_system_spec():
    plan = CompositionPlan({"Election": "baseline", "Discovery": "baseline",
                            "Synchronization": "baseline", "Broadcast": "baseline"})
    assert compose(plan, LIBRARY) == build_mspec("baseline")


def test_coarsening_replaces_the_eight_election_discovery_actions():
    sys_, m1 = names(build_mspec("baseline")), names(build_mspec(1))
    assert ELECTION_DISCOVERY <= sys_
    assert m1 == (sys_ - ELECTION_DISCOVERY) | {"ElectionAndDiscovery"}


def test_fine_atomicity_splits_newleader_in_three():
    m1, m2 = names(build_mspec(1)), names(build_mspec(2))
    fine = {"FollowerProcessNEWLEADERUpdateEpoch", "FollowerProcessNEWLEADERLogAsync",
            "FollowerProcessNEWLEADERReplyACK"}
    assert m2 == (m1 - {"FollowerProcessNEWLEADER"}) | fine


def test_thread_queue_only_in_concurrency_variant():
    assert "queuedRequests" in build_mspec(3).variables
    assert "queuedRequests" not in build_mspec(2).variables


def test_dangling_variable_is_named():
    plan = CompositionPlan({"ElectionAndDiscovery": "coarse", "Synchronization": "baseline",
                            "Broadcast": "fine-concurrency"})
    with pytest.raises(CompositionError, match="queuedRequests"):
        compose(plan, LIBRARY)


def test_conflicting_initializers_rejected():
    a = ModuleSpec("A", "v", (), {"x": 0})
    b = ModuleSpec("B", "v", (), {"x": 1})
    with pytest.raises(CompositionError, match="'x'"):
        compose_modules([a, b])


def test_overlapping_modules_rejected():
    plan = CompositionPlan({"ElectionAndDiscovery": "coarse", "Election": "baseline",
                            "Synchronization": "baseline", "Broadcast": "baseline"})
    with pytest.raises(CompositionError, match="both define variable"):
        compose(plan, LIBRARY)


def test_duplicate_action_names_rejected():
    act = ActionDef("Go", "A")
    with pytest.raises(CompositionError):
        ModuleSpec("A", "v", (act, act))


def test_unknown_variant():
    with pytest.raises(CompositionError, match="no variant"):
        compose(CompositionPlan({"Synchronization": "imaginary"}), LIBRARY)


def test_listing():
    assert list_variants(Library()) == {}
    sync = set(list_variants(LIBRARY)["Synchronization"])
    assert {"baseline", "fine-atomicity", "fine-atomicity+concurrency"} <= sync
    lib = Library(LIBRARY.modules())
    before = list_variants(lib)
    lib.register(ModuleSpec("Extra", "only", (), {}))
    after = list_variants(lib)
    assert after == {**before, "Extra": ["only"]}


def test_plan_round_trip(tmp_path):
    plan = preset_plan("mSpec-2", Constants(3, 2, 1, 1))
    save_plan(tmp_path / "p.json", plan)
    back = load_plan(tmp_path / "p.json")
    assert back.selections == plan.selections and back.constants == plan.constants
    assert compose(back, LIBRARY) == compose(plan, LIBRARY)


def test_plan_needs_modules(tmp_path):
    (tmp_path / "p.json").write_text('{"scale": {"nodes": 3}}')
    with pytest.raises(CompositionError):
        load_plan(tmp_path / "p.json")


presets = st.sampled_from(sorted(PRESETS))


@given(presets)
def test_action_set_is_disjoint_union(name):
    spec = compose(preset_plan(name), LIBRARY)
    expected = []
    for m in spec.modules:
        expected += [a.name for a in m.actions]
    assert sorted(a.name for a in spec.actions) == sorted(expected)
    assert len(set(expected)) == len(expected)


@given(presets)
def test_compose_is_deterministic(name):
    a = compose(preset_plan(name), LIBRARY)
    b = compose(preset_plan(name), LIBRARY)
    assert a == b and a.init == b.init


@given(presets)
def test_code_invariants_follow_selection(name):
    spec = compose(preset_plan(name), LIBRARY)
    expected = set()
    for m in spec.modules:
        expected |= {i.id for i in m.invariants}
    assert {i.id for i in spec.invariants} == expected
    sync = spec.selected("Synchronization").granularity
    has_thread_bug = any(i.id.startswith("C-ZK4712") for i in spec.invariants)
    assert has_thread_bug == (sync == "fine-atomicity+concurrency")
