"""The shipped bug evidence: each model counterexample is confirmed in the
simulator only while the matching bug flag is on, and each scenario replays
deterministically.
"""

import dataclasses
from pathlib import Path

import pytest

from mgcheck.algebra import Constants
from mgcheck.bugs import HUNT_CONSTANTS, TARGETS, hunt, with_flag
from mgcheck.conformance import confirm_violation, default_flags
from mgcheck.sim import load_scenario, new_cluster, observe, step
from mgcheck.traceio import read_trace
from mgcheck.zab import build_mspec
from mgcheck.zab.invariants import CODE

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
BUGS = sorted(TARGETS)


def _evidence(bug):
    target = TARGETS[bug]
    spec = build_mspec(target.level, HUNT_CONSTANTS)
    return target, spec, read_trace(SCENARIOS / f"{bug}.trace"), load_scenario(SCENARIOS / f"{bug}.json")


@pytest.mark.parametrize("bug", BUGS)
def test_counterexample_is_a_valid_trace(bug):
    target, spec, trace, _ = _evidence(bug)
    trace.validate(spec)
    inv = CODE[bug]
    pre, (inst, post) = trace.states[-2], trace.steps[-1]
    assert inv.fires_on(inst.name) and not inv.check(pre, inst, post, spec.constants)


@pytest.mark.parametrize("bug", BUGS)
def test_confirmed_only_with_the_flag(bug):
    target, spec, trace, _ = _evidence(bug)
    flags = default_flags(spec)
    assert getattr(flags, target.flag)
    assert confirm_violation(spec, trace, CODE[bug].id, flags).confirmed
    off = dataclasses.replace(flags, **{target.flag: False})
    assert not confirm_violation(spec, trace, CODE[bug].id, off).confirmed


@pytest.mark.parametrize("bug", BUGS)
def test_scenario_replays_deterministically(bug):
    _, _, _, sc = _evidence(bug)
    # building a cluster from a scenario applies its prefix
    runs = [new_cluster(sc) for _ in range(2)]
    assert [(observe(c), c.faults, c.marks) for c in runs][0] == (observe(runs[1]), runs[1].faults, runs[1].marks)
    stepped = new_cluster(dataclasses.replace(sc, prefix=()))
    for e in sc.prefix:
        stepped = step(stepped, e)
    assert observe(stepped) == observe(runs[0])
    assert getattr(sc.flags, TARGETS[bug].flag)


def test_null_dereference_needs_its_flag():
    _, _, _, sc = _evidence("ZK-4394")
    assert new_cluster(sc).faults
    cl = new_cluster(dataclasses.replace(with_flag(sc, "zk4394", False), prefix=()))
    for e in sc.prefix:
        if not cl.apply(e):
            break
    assert not cl.faults


def test_hunt_without_violation_reports_cleanly():
    h = hunt("ZK-4643", Constants(3, 1, 0, 0), time_limit=60)
    assert not h.found and not h.confirmed
    assert "no violation" in h.summary()
    with pytest.raises(ValueError):
        h.scenario()
