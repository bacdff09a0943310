"""End-to-end hunts for the six seeded bugs: model-check the matching
mixed-grained spec for the bug's code-level invariant, then reproduce the
violating trace in the simulator.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

from .algebra import ComposedSpec, Constants
from .conformance import Confirmation, confirm_violation, default_flags, mark_known_buggy
from .kernel import CheckResult, ExplorationBounds, Trace, bfs_check
from .sim import Scenario
from .zab import build_mspec
from .zab.invariants import CODE


@dataclass(frozen=True)
class BugTarget:
    bug: str
    level: int
    flag: str


TARGETS = {
    "ZK-4394": BugTarget("ZK-4394", 1, "zk4394"),
    "ZK-4643": BugTarget("ZK-4643", 2, "zk4643"),
    "ZK-4646": BugTarget("ZK-4646", 2, "zk4646"),
    "ZK-3023": BugTarget("ZK-3023", 3, "zk3023"),
    "ZK-4685": BugTarget("ZK-4685", 3, "zk4685"),
    "ZK-4712": BugTarget("ZK-4712", 3, "zk4712"),
}

HUNT_CONSTANTS = Constants(nodes=3, max_txns=2, max_crashes=2, max_partitions=1)


@dataclass
class BugHunt:
    target: BugTarget
    spec: ComposedSpec
    result: CheckResult
    trace: Trace | None
    confirmation: Confirmation | None
    seconds: float

    @property
    def found(self) -> bool:
        return self.trace is not None

    @property
    def confirmed(self) -> bool:
        return self.confirmation is not None and self.confirmation.confirmed

    def scenario(self) -> Scenario:
        """Simulator events of the confirming replay, as a regression scenario."""
        if self.confirmation is None:
            raise ValueError("nothing to record: no violation was found")
        flags = default_flags(self.spec)
        return Scenario(self.spec.constants.nodes, flags, tuple(self.confirmation.replay.events))

    def summary(self) -> str:
        head = (f"{self.target.bug} on mSpec-{self.target.level}: {self.result.outcome}, "
                f"{self.result.distinct_states} states, {self.seconds:.1f}s")
        if not self.found:
            return head + ", no violation"
        return f"{head}, trace of {len(self.trace)} steps; {self.confirmation.report()}"


def hunt(bug: str, constants: Constants = HUNT_CONSTANTS, time_limit: float | None = 600) -> BugHunt:
    """Breadth-first search for ``bug``'s invariant, then confirmation.

    On the thread-level spec the commit-without-pending-proposal path is
    reachable early and masks the deeper bugs, so transitions violating it
    are pruned when hunting the others there.
    """
    target = TARGETS[bug]
    spec = build_mspec(target.level, constants)
    inv = CODE[bug]
    prune = None
    if target.level == 3 and bug != "ZK-4394":
        prune = mark_known_buggy([CODE["ZK-4394"].id])
    t0 = time.monotonic()
    r = bfs_check(spec, [inv], ExplorationBounds(time_limit=time_limit), stop="first", prune=prune)
    if not r.violations:
        return BugHunt(target, spec, r, None, None, time.monotonic() - t0)
    _, trace = r.violations[0]
    conf = confirm_violation(spec, trace, inv.id)
    return BugHunt(target, spec, r, trace, conf, time.monotonic() - t0)


def with_flag(sc: Scenario, flag: str, on: bool) -> Scenario:
    return dataclasses.replace(sc, flags=dataclasses.replace(sc.flags, **{flag: on}))
