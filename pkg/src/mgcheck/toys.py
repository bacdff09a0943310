"""Small two-module systems for exercising the interaction analysis.

Each builder returns a :class:`ToyCase`: a target module, the fine-grained
variant of the other module, a coarsening of it that keeps every
interaction, and (for the producer/consumer system) a coarsening that
drops an update the target observes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import ModuleSpec
from .kernel import ActionDef


@dataclass(frozen=True)
class ToyCase:
    name: str
    target: ModuleSpec
    original: ModuleSpec
    coarsened: ModuleSpec
    mutant: ModuleSpec | None = None


# -- producer / consumer over one shared flag ---------------------------------
# producer: fills a scratch slot, then publishes it when the flag is down
# consumer (target): takes the published value and lowers the flag

MAX_ITEMS = 3


def _prepare_guard(s, c):
    return s["stage"] == 0 and s["produced"] < MAX_ITEMS


def _prepare(s, c):
    return {"stage": 1}


def _publish_guard(s, c):
    return s["stage"] == 1 and s["flag"] == 0


def _publish(s, c):
    return {"stage": 0, "flag": 1, "buf": s["produced"] + 1, "produced": s["produced"] + 1}


def _produce_guard(s, c):
    return s["flag"] == 0 and s["produced"] < MAX_ITEMS


def _produce(s, c):
    return {"flag": 1, "buf": s["produced"] + 1, "produced": s["produced"] + 1}


def _produce_no_flag(s, c):
    # faulty coarsening: the flag is never raised
    return {"buf": s["produced"] + 1, "produced": s["produced"] + 1}


def _consume_guard(s, c):
    return s["flag"] == 1 and s["buf"] > 0


def _consume(s, c):
    return {"flag": 0, "total": s["total"] + s["buf"]}


_PUBLISH_WRITES = {"stage": frozenset(), "flag": frozenset(), "buf": frozenset({"produced"}),
                   "produced": frozenset({"produced"})}
_PRODUCE_WRITES = {"flag": frozenset(), "buf": frozenset({"produced"}), "produced": frozenset({"produced"})}

PRODUCER_FINE = ModuleSpec(
    "Producer", "fine",
    (ActionDef("Prepare", "Producer", (), _prepare_guard, _prepare,
               reads=frozenset({"stage", "produced"}), writes={"stage": frozenset()}),
     ActionDef("Publish", "Producer", (), _publish_guard, _publish,
               reads=frozenset({"stage", "flag"}), writes=_PUBLISH_WRITES)),
    {"stage": 0, "produced": 0, "flag": 0, "buf": 0},
)

PRODUCER_COARSE = ModuleSpec(
    "Producer", "coarse",
    (ActionDef("Produce", "Producer", (), _produce_guard, _produce,
               reads=frozenset({"flag", "produced"}), writes=_PRODUCE_WRITES),),
    {"produced": 0, "flag": 0, "buf": 0},
)

PRODUCER_NO_FLAG = ModuleSpec(
    "Producer", "coarse-no-flag",
    (ActionDef("Produce", "Producer", (), _produce_guard, _produce_no_flag,
               reads=frozenset({"flag", "produced"}),
               writes={"buf": frozenset({"produced"}), "produced": frozenset({"produced"})}),),
    {"produced": 0, "flag": 0, "buf": 0},
)

CONSUMER = ModuleSpec(
    "Consumer", "standard",
    (ActionDef("Consume", "Consumer", (), _consume_guard, _consume,
               reads=frozenset({"flag", "buf"}),
               writes={"flag": frozenset(), "total": frozenset({"total", "buf"})}),),
    {"flag": 0, "buf": 0, "total": 0},
)


def producer_consumer() -> ToyCase:
    return ToyCase("producer-consumer", CONSUMER, PRODUCER_FINE, PRODUCER_COARSE, PRODUCER_NO_FLAG)


# -- lock and worker -----------------------------------------------------------
# two clients acquire a lock (fine: announce intent, then grab); the worker
# (target) lets the owner do a unit of work and release the lock

CLIENTS = (0, 1)
ROUNDS = 2


def _want_guard(s, c, i):
    return s["owner"] is None and not s["want"][i] and s["done"][i] < ROUNDS


def _want(s, c, i):
    w = list(s["want"])
    w[i] = True
    return {"want": tuple(w)}


def _grab_guard(s, c, i):
    return s["want"][i] and s["owner"] is None


def _grab(s, c, i):
    w = list(s["want"])
    w[i] = False
    return {"want": tuple(w), "owner": i}


def _acquire_guard(s, c, i):
    return s["owner"] is None and s["done"][i] < ROUNDS


def _acquire(s, c, i):
    return {"owner": i}


def _work_guard(s, c, i):
    return s["owner"] == i


def _work(s, c, i):
    d = list(s["done"])
    d[i] += 1
    return {"owner": None, "done": tuple(d), "log": s["log"] + (i,)}


LOCK_FINE = ModuleSpec(
    "Lock", "fine",
    (ActionDef("Announce", "Lock", (("i", CLIENTS),), _want_guard, _want,
               reads=frozenset({"owner", "want", "done"}), writes={"want": frozenset({"want"})}),
     ActionDef("Grab", "Lock", (("i", CLIENTS),), _grab_guard, _grab,
               reads=frozenset({"want", "owner"}),
               writes={"want": frozenset({"want"}), "owner": frozenset()})),
    {"owner": None, "want": (False, False), "done": (0, 0)},
)

LOCK_COARSE = ModuleSpec(
    "Lock", "coarse",
    (ActionDef("Acquire", "Lock", (("i", CLIENTS),), _acquire_guard, _acquire,
               reads=frozenset({"owner", "done"}), writes={"owner": frozenset()}),),
    {"owner": None, "done": (0, 0)},
)

WORKER = ModuleSpec(
    "Worker", "standard",
    (ActionDef("Work", "Worker", (("i", CLIENTS),), _work_guard, _work,
               reads=frozenset({"owner"}),
               writes={"owner": frozenset(), "done": frozenset({"done"}), "log": frozenset({"log"})}),),
    {"owner": None, "done": (0, 0), "log": ()},
)


def lock_worker() -> ToyCase:
    return ToyCase("lock-worker", WORKER, LOCK_FINE, LOCK_COARSE)


def toy_cases() -> list[ToyCase]:
    return [producer_consumer(), lock_worker()]


# -- random flat specs ---------------------------------------------------------
# Pure data so that independent oracles can interpret them without the kernel.
# A guard is a conjunction of (var, op, const); an update assigns each target
# either (const, k), (add, k) modulo the domain, or (copy, other var) clamped.

_OPS = ("==", "!=", "<", ">=")


def _holds(op: str, a: int, b: int) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    return a >= b


@dataclass(frozen=True)
class RandomToy:
    seed: int
    domains: tuple          # ((var, size), ...)
    actions: tuple          # ((name, guard, updates), ...)
    forbidden: tuple        # ((var, value), ...) that must not hold together
    init: tuple             # ((var, value), ...)

    @property
    def state_space(self) -> int:
        n = 1
        for _, size in self.domains:
            n *= size
        return n

    def enabled(self, s: dict, guard) -> bool:
        return all(_holds(op, s[v], k) for v, op, k in guard)

    def apply(self, s: dict, updates) -> dict:
        sizes = dict(self.domains)
        out = {}
        for v, kind, arg in updates:
            if kind == "const":
                out[v] = arg
            elif kind == "add":
                out[v] = (s[v] + arg) % sizes[v]
            else:
                out[v] = min(s[arg], sizes[v] - 1)
        return out

    def violates(self, s: dict) -> bool:
        return all(s[v] == k for v, k in self.forbidden)

    def system(self):
        from .kernel import Invariant, State, System

        def action(name, guard, updates):
            reads = frozenset(v for v, _, _ in guard)
            writes = {v: frozenset({v} if kind == "add" else {arg} if kind == "copy" else ())
                      for v, kind, arg in updates}
            return ActionDef(name, "Toy", (), lambda s, c: self.enabled(s, guard),
                             lambda s, c: self.apply(s, updates), reads=reads, writes=writes)

        inv = Invariant("Forbidden", lambda s, c: not self.violates(s))
        return System(frozenset(v for v, _ in self.domains), (State.from_dict(dict(self.init)),),
                      tuple(action(*a) for a in self.actions), invariants=(inv,))


def random_toy(seed: int, max_states: int = 50_000) -> RandomToy:
    """A small random spec whose forbidden valuation is usually reachable."""
    import random

    rng = random.Random(seed)
    while True:
        names = [f"v{k}" for k in range(rng.randint(3, 6))]
        domains = tuple((v, rng.randint(2, 8)) for v in names)
        size = 1
        for _, d in domains:
            size *= d
        if size <= max_states:
            break
    sizes = dict(domains)
    actions = []
    for k in range(rng.randint(4, 9)):
        guard = tuple((v, rng.choice(_OPS), rng.randrange(sizes[v]))
                      for v in rng.sample(names, rng.randint(0, 2)))
        updates = []
        for v in rng.sample(names, rng.randint(1, 2)):
            kind = rng.choice(("const", "add", "add", "copy"))
            if kind == "const":
                arg = rng.randrange(sizes[v])
            elif kind == "add":
                arg = rng.randint(1, sizes[v] - 1)
            else:
                arg = rng.choice(names)
            updates.append((v, kind, arg))
        actions.append((f"A{k}", guard, tuple(updates)))
    init = tuple((v, 0) for v in names)
    toy = RandomToy(seed, domains, tuple(actions), (), init)
    # aim the forbidden valuation at a state some random walk reaches
    s = dict(init)
    for _ in range(rng.randint(10, 40)):
        live = [a for a in actions if toy.enabled(s, a[1])]
        if not live:
            break
        s.update(toy.apply(s, rng.choice(live)[2]))
    moved = [v for v in names if s[v] != 0]
    if not moved:
        # nothing reachable differs from the start: forbid an arbitrary valuation
        v = rng.choice(names)
        s[v] = sizes[v] - 1
        moved = [v]
    picked = {rng.choice(moved)} | set(rng.sample(names, min(len(names), rng.randint(1, 2))))
    return RandomToy(seed, domains, tuple(actions), tuple((v, s[v]) for v in sorted(picked)), init)
