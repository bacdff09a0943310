"""Modules at several granularities and their composition.

A :class:`ModuleSpec` is one granularity variant of a named module.  A
:class:`CompositionPlan` picks one variant per module; :func:`compose`
turns the selection into a :class:`ComposedSpec` whose next-state relation
is the union of the selected actions.
"""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .kernel import ActionDef, State, System


class CompositionError(Exception):
    """Semantic error in a composition (conflict, dangling variable, ...)."""


@dataclass(frozen=True)
class Constants:
    nodes: int = 3
    max_txns: int = 2
    max_crashes: int = 0
    max_partitions: int = 0

    @property
    def node_ids(self) -> tuple:
        return tuple(range(self.nodes))

    @property
    def quorum(self) -> int:
        return self.nodes // 2 + 1


@dataclass(frozen=True)
class ModuleSpec:
    name: str
    granularity: str
    actions: tuple = ()
    # variable -> initial value, or callable(constants) -> initial value
    variables: Mapping = field(default_factory=dict, compare=False)
    invariants: tuple = ()
    description: str = ""

    def __post_init__(self):
        names = [a.name for a in self.actions]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise CompositionError(f"module {self.name}/{self.granularity}: duplicate actions {dup}")
        for a in self.actions:
            if a.module != self.name:
                raise CompositionError(f"action {a.name} belongs to {a.module}, not {self.name}")

    @property
    def action_names(self) -> frozenset:
        return frozenset(a.name for a in self.actions)

    def initial_values(self, c: Constants) -> dict:
        return {v: (init(c) if callable(init) else init) for v, init in self.variables.items()}


def merge_modules(name: str, granularity: str, modules: Iterable[ModuleSpec]) -> ModuleSpec:
    """View several modules as one (used to analyse a combined coarsening)."""
    actions, variables, invs = [], {}, {}
    for m in modules:
        actions += [dataclasses.replace(a, module=name) for a in m.actions]
        variables.update(m.variables)
        for inv in m.invariants:
            invs.setdefault(inv.id, inv)
    return ModuleSpec(name, granularity, tuple(actions), variables, tuple(invs.values()))


class Library:
    """Registry of module variants.  ``always`` modules join every composition.

    ``covers`` maps a merged module to the modules it replaces; a plan may
    not select both.
    """

    def __init__(self, modules: Iterable[ModuleSpec] = (), always: Iterable[str] = (),
                 covers: Mapping[str, Iterable[str]] | None = None):
        self._mods: dict[tuple[str, str], ModuleSpec] = {}
        self.always = set(always)
        self.covers = {k: frozenset(v) for k, v in (covers or {}).items()}
        for m in modules:
            self.register(m)

    def register(self, m: ModuleSpec) -> None:
        key = (m.name, m.granularity)
        if key in self._mods:
            raise CompositionError(f"variant {m.name}/{m.granularity} already registered")
        self._mods[key] = m

    def get(self, name: str, granularity: str) -> ModuleSpec:
        try:
            return self._mods[(name, granularity)]
        except KeyError:
            raise CompositionError(f"no variant {granularity!r} of module {name!r}") from None

    def modules(self) -> list[ModuleSpec]:
        return [self._mods[k] for k in sorted(self._mods)]

    def __iter__(self):
        return iter(self.modules())

    def __len__(self):
        return len(self._mods)


def list_variants(library: Library | Iterable[ModuleSpec]) -> dict[str, list[str]]:
    out: dict[str, set] = {}
    for m in library:
        out.setdefault(m.name, set()).add(m.granularity)
    return {k: sorted(v) for k, v in sorted(out.items())}


@dataclass(frozen=True)
class CompositionPlan:
    selections: Mapping = field(default_factory=dict)
    constants: Constants = Constants()
    name: str = ""

    def to_json(self) -> dict:
        c = self.constants
        return {
            "name": self.name,
            "modules": dict(sorted(self.selections.items())),
            "scale": {"nodes": c.nodes, "max_txns": c.max_txns},
            "faults": {"max_crashes": c.max_crashes, "max_partitions": c.max_partitions},
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "CompositionPlan":
        if "modules" not in d or not isinstance(d["modules"], Mapping):
            raise CompositionError("plan needs a 'modules' map")
        scale = d.get("scale", {})
        faults = d.get("faults", {})
        c = Constants(
            nodes=int(scale.get("nodes", 3)),
            max_txns=int(scale.get("max_txns", 2)),
            max_crashes=int(faults.get("max_crashes", 0)),
            max_partitions=int(faults.get("max_partitions", 0)),
        )
        return cls(dict(d["modules"]), c, d.get("name", ""))

    def with_constants(self, **kw) -> "CompositionPlan":
        return dataclasses.replace(self, constants=dataclasses.replace(self.constants, **kw))


def load_plan(path) -> CompositionPlan:
    try:
        return CompositionPlan.from_json(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as e:
        raise CompositionError(f"{path}: {e}") from None


def save_plan(path, plan: CompositionPlan) -> None:
    Path(path).write_text(json.dumps(plan.to_json(), indent=2, sort_keys=True) + "\n")


@dataclass(eq=False)
class ComposedSpec(System):
    modules: tuple = ()
    plan: CompositionPlan | None = None

    def signature(self) -> tuple:
        return (
            tuple((m.name, m.granularity) for m in self.modules),
            tuple(a.name for a in self.actions),
            tuple(sorted(self.variables)),
            tuple(i.id for i in self.invariants),
            self.init,
            self.constants,
        )

    def __eq__(self, other):
        if not isinstance(other, ComposedSpec):
            return NotImplemented
        return self.signature() == other.signature()

    def __hash__(self):
        return hash(self.signature()[:4])

    def module_of(self, action_name: str) -> str:
        return self.action(action_name).module

    def selected(self, module: str) -> ModuleSpec:
        for m in self.modules:
            if m.name == module:
                return m
        raise KeyError(module)


def _specialize(a: ActionDef, declared: set) -> ActionDef:
    drop = set(a.optional) - declared
    if not drop:
        return a
    writes = {v: frozenset(set(d) - drop) for v, d in a.writes.items() if v not in drop}
    return dataclasses.replace(a, reads=frozenset(set(a.reads) - drop), writes=writes,
                               optional=frozenset(set(a.optional) - drop))


def compose_modules(modules: Iterable[ModuleSpec], constants: Constants = Constants(),
                    plan: CompositionPlan | None = None, validate: bool = False) -> ComposedSpec:
    modules = list(modules)
    seen_names = set()
    for m in modules:
        if m.name in seen_names:
            raise CompositionError(f"module {m.name} selected twice")
        seen_names.add(m.name)

    init: dict[str, Any] = {}
    owner: dict[str, str] = {}
    for m in modules:
        for var, val in m.initial_values(constants).items():
            if var in init and init[var] != val:
                raise CompositionError(
                    f"conflicting initializers for variable {var!r} "
                    f"({owner[var]} vs {m.name}/{m.granularity})")
            init[var] = val
            owner.setdefault(var, f"{m.name}/{m.granularity}")
    declared = set(init)

    actions, invs = [], {}
    for m in modules:
        for a in m.actions:
            a = _specialize(a, declared)
            missing = sorted((a.variables() - set(a.optional)) - declared)
            if missing:
                raise CompositionError(
                    f"action {a.name} ({m.name}/{m.granularity}) references undeclared variable(s) "
                    + ", ".join(missing))
            actions.append(a)
        for inv in m.invariants:
            invs.setdefault(inv.id, inv)
    names = [a.name for a in actions]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise CompositionError(f"action name clash across modules: {dup}")

    return ComposedSpec(
        variables=frozenset(declared),
        init=(State.from_dict(init),),
        actions=tuple(actions),
        constants=constants,
        invariants=tuple(sorted(invs.values(), key=lambda i: i.id)),
        validate=validate,
        modules=tuple(modules),
        plan=plan,
    )


def _written(m: ModuleSpec) -> set:
    return set(m.variables) | {v for a in m.actions for v in a.writes}


def compose(plan: CompositionPlan, library: Library, validate: bool = False) -> ComposedSpec:
    """Build the mixed-grained spec selected by ``plan``."""
    sel = dict(plan.selections)
    for merged, parts in sorted(library.covers.items()):
        for part in sorted(parts & set(sel)):
            if merged in sel:
                a, b = library.get(merged, sel[merged]), library.get(part, sel[part])
                shared = sorted(_written(a) & _written(b)) or ["?"]
                raise CompositionError(
                    f"{merged} and {part} both define variable {shared[0]!r}; "
                    f"{merged} replaces {', '.join(sorted(parts))}")
    mods = []
    for name in sorted(sel):
        mods.append(library.get(name, sel[name]))
    for name in sorted(library.always - set(sel)):
        variants = [m for m in library if m.name == name]
        if len(variants) != 1:
            raise CompositionError(f"always-selected module {name} needs exactly one variant")
        mods.append(variants[0])
    return compose_modules(mods, plan.constants, plan, validate)
