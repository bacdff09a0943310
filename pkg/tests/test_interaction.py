import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgcheck.algebra import Constants, ModuleSpec, compose_modules, merge_modules
from mgcheck.interaction import (UPDATES_UNCHANGED, ClassificationMissing, OracleBounds,
                                 check_interaction_preserving, classify, dependency_vars,
                                 interaction_vars, project_and_condense, theorem_oracle)
from mgcheck.kernel import ActionDef, random_walk
from mgcheck.toys import lock_worker, producer_consumer
from mgcheck.zab import LIBRARY
from mgcheck.zab import election as E

C = Constants(2, 0, 0, 0)


def act(name, module, reads=(), writes=None):
    return ActionDef(name, module, reads=frozenset(reads),
                     writes={v: frozenset(d) for v, d in (writes or {}).items()})


def mod(name, *actions, variables=()):
    return ModuleSpec(name, "v", tuple(actions), {v: 0 for v in variables})


# -- dependency variables ------------------------------------------------------------

def test_constant_write_without_guard_has_no_dependencies():
    assert dependency_vars(mod("M", act("a", "M", (), {"x": ()}))) == frozenset()


def test_dependency_closure():
    m = mod("M", act("a", "M", {"x"}, {"x": {"y", "z"}}))
    assert dependency_vars(m) == {"x", "y", "z"}


def test_synchronization_dependencies():
    # hand application of the rules: every baseline guard reads msgs; the
    # assignments into msgs pull in history and acceptedEpoch.  currentEpoch
    # is only written there, but the split NEWLEADER handling reads it.
    d = dependency_vars(LIBRARY.get("Synchronization", "baseline"))
    assert {"history", "msgs", "acceptedEpoch", "syncPackets"} <= d
    assert "currentEpoch" not in d
    assert "currentEpoch" in dependency_vars(LIBRARY.get("Synchronization", "fine-atomicity"))


# -- interaction variables ------------------------------------------------------------

def test_disjoint_modules_do_not_interact():
    a = mod("A", act("a", "A", {"x"}, {"x": ()}))
    b = mod("B", act("b", "B", {"y"}, {"y": ()}))
    assert interaction_vars([a, b]) == frozenset()


def test_shared_dependency_pulls_in_its_sources():
    a = mod("A", act("a", "A", {"x"}))
    b = mod("B", act("b", "B", {"x"}, {"x": {"w"}}))
    # w is in D_B by closure, so it must be listed explicitly as the source
    assert interaction_vars([a, b], {"A": frozenset({"x"}), "B": frozenset({"x"})}) == {"x", "w"}


def test_shipped_library_interaction_variables():
    four = [LIBRARY.get(n, "baseline") for n in ("Election", "Discovery", "Synchronization", "Broadcast")]
    inter = classify(four + [LIBRARY.get("Faults", "standard")]).interaction
    assert {"state", "zabState", "msgs"} <= inter
    assert "currentVote" not in inter


def test_toy_classifications():
    pc = producer_consumer()
    cl = classify([pc.original, pc.target])
    assert cl.dependency["Consumer"] == {"buf", "flag"}
    assert cl.dependency["Producer"] == {"flag", "produced", "stage"}
    assert cl.interaction == {"flag", "produced"}
    lw = lock_worker()
    assert classify([lw.original, lw.target]).interaction == {"owner"}


variables = st.sampled_from("abcdefg")


@st.composite
def random_modules(draw):
    mods = []
    for k in range(draw(st.integers(2, 4))):
        name = f"M{k}"
        acts = []
        for j in range(draw(st.integers(1, 3))):
            reads = draw(st.frozensets(variables, max_size=3))
            writes = draw(st.dictionaries(variables, st.frozensets(variables, max_size=2), max_size=3))
            acts.append(act(f"{name}a{j}", name, reads, writes))
        mods.append(mod(name, *acts))
    return mods


@given(random_modules())
def test_rule_one_is_conservative(mods):
    dep = {m.name: dependency_vars(m) for m in mods}
    inter = interaction_vars(mods, dep)
    for x in mods:
        for y in mods:
            if x.name < y.name:
                assert dep[x.name] & dep[y.name] <= inter


@given(random_modules())
def test_dependency_sets_are_closed(mods):
    for m in mods:
        d = dependency_vars(m)
        for a in m.actions:
            for v, deps in a.writes.items():
                if v in d:
                    assert deps <= d


@given(random_modules())
def test_interaction_set_is_a_fixpoint(mods):
    dep = {m.name: dependency_vars(m) for m in mods}
    inter = interaction_vars(mods, dep)
    assert interaction_vars(mods, dep) == inter
    every = [(m.name, a) for m in mods for a in m.actions]
    for owner, a in every:
        for v, deps in a.writes.items():
            if v in inter:
                assert deps - dep[owner] <= inter
            for m in mods:
                if v in dep[m.name] and v not in inter:
                    assert deps - dep[m.name] <= inter


# -- coarsening rules ------------------------------------------------------------------

def _ed():
    four = [LIBRARY.get(n, "baseline") for n in ("Election", "Discovery", "Synchronization", "Broadcast")]
    context = four[2:] + [LIBRARY.get("Faults", "standard")]
    original = merge_modules("ElectionAndDiscovery", "baseline", four[:2])
    return original, context, classify([original] + context)


def test_identity_coarsening_is_preserved():
    pc = producer_consumer()
    cl = classify([pc.original, pc.target])
    v = check_interaction_preserving(pc.original, pc.original, [pc.target], "Consumer", cl, C)
    assert v.preserved and not v.violations


def test_shipped_election_coarsening_is_preserved():
    original, context, cl = _ed()
    v = check_interaction_preserving(original, E.COARSE, context, "Synchronization", cl,
                                     Constants(2, 1, 0, 0))
    assert v.preserved, v.report()


def test_dropping_an_observed_update_is_reported():
    original, context, cl = _ed()
    (a,) = E.COARSE.actions
    writes = {k: v for k, v in a.writes.items() if k != "zabState"}

    def update(s, c, i, q):
        ch = a.update(s, c, i=i, q=q)
        ch.pop("zabState", None)
        return ch
    broken = dataclasses.replace(E.COARSE, actions=(dataclasses.replace(a, writes=writes, update=update),))
    v = check_interaction_preserving(original, broken, context, "Synchronization", cl)
    assert not v.preserved
    assert (UPDATES_UNCHANGED, "zabState") in {(x.rule, x.variable) for x in v.violations}


def test_missing_classification():
    pc = producer_consumer()
    with pytest.raises(ClassificationMissing):
        check_interaction_preserving(pc.original, pc.coarsened, [pc.target], "Consumer", None)


# -- projection and the trace oracle --------------------------------------------------------

def test_condensation_of_invisible_steps():
    pc = producer_consumer()
    cl = classify([pc.original, pc.target])
    full = compose_modules([pc.original, pc.target], C)
    (t,) = random_walk(full, 0, 1)
    assert t.actions[0].name == "Prepare"  # only internal stage changes
    assert len(project_and_condense(t, cl, "Consumer")) == 1


def test_zab_projection_matches_hand_restriction():
    original, context, _ = _ed()
    from mgcheck.zab import build_mspec
    spec = build_mspec(1, Constants(3, 1, 0, 0))
    cl = classify(spec.modules)
    (t,) = random_walk(spec, 4, 10)
    keep = sorted(cl.dependency["Broadcast"] | cl.interaction)
    expected = []
    for s in t.states:
        row = {v: s[v] for v in keep if v in s}
        if not expected or expected[-1] != row:
            expected.append(row)
    got = project_and_condense(t, cl, "Broadcast").as_dicts()
    assert [{k: v for k, v in d.items() if v is not None or k in spec.variables} for d in got] == expected
    for a, b in zip(got, got[1:]):
        assert a != b


def test_oracle_identity():
    pc = producer_consumer()
    cl = classify([pc.original, pc.target])
    full = compose_modules([pc.original, pc.target], C)
    assert theorem_oracle(full, full, "Consumer", cl).equivalent


@pytest.mark.parametrize("case", [producer_consumer(), lock_worker()], ids=lambda c: c.name)
def test_oracle_agrees_with_rules_on_toys(case):
    cl = classify([case.original, case.target])
    full = compose_modules([case.original, case.target], C)
    coarse = compose_modules([case.coarsened, case.target], C)
    v = check_interaction_preserving(case.original, case.coarsened, [case.target], case.target.name, cl, C)
    r = theorem_oracle(full, coarse, case.target.name, cl, OracleBounds(max_len=12))
    assert v.preserved and r.equivalent


def test_rule_violating_toy_has_counterexample():
    pc = producer_consumer()
    cl = classify([pc.original, pc.target])
    v = check_interaction_preserving(pc.original, pc.mutant, [pc.target], "Consumer", cl, C)
    assert not v.preserved
    assert ("updates-unchanged", "flag") in {(x.rule, x.variable) for x in v.violations}
    full = compose_modules([pc.original, pc.target], C)
    bad = compose_modules([pc.mutant, pc.target], C)
    r = theorem_oracle(full, bad, "Consumer", cl, OracleBounds(max_len=12))
    assert not r.equivalent and r.witness_side == "full"
