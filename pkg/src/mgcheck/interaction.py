"""Which variables carry effects between modules, and whether a coarsening
keeps the target module's view of the system intact.

Dependency variables of a module are its guard variables closed under the
module's own assignments.  Interaction variables are the dependency
variables shared by several modules, closed under assignments that feed
them from outside a module's dependency set.  A coarsening of a non-target
module must keep every variable in ``D_target | I`` and every update to
those variables; the trace oracle checks the consequence directly by
comparing condensed projected trace sets of the full and coarsened specs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Mapping

from .algebra import ComposedSpec, Constants, ModuleSpec, _specialize, compose_modules
from .kernel import State, Trace, _successors

VARS_UNCHANGED = "vars-unchanged"
UPDATES_UNCHANGED = "updates-unchanged"


class ClassificationMissing(Exception):
    """Dependency or interaction sets were not computed for some module."""


class BudgetExhausted(Exception):
    """Enumeration went past its state or trace budget."""


@dataclass(frozen=True)
class VariableClassification:
    dependency: Mapping[str, frozenset]
    interaction: frozenset

    def relevant(self, target: str) -> frozenset:
        """``D_target | I``: the variables the target module can observe."""
        if target not in self.dependency:
            raise ClassificationMissing(f"no dependency set for module {target!r}")
        return frozenset(self.dependency[target]) | self.interaction

    def report(self) -> str:
        lines = []
        for name in sorted(self.dependency):
            lines.append(f"D[{name}] = {{{', '.join(sorted(self.dependency[name]))}}}")
        lines.append(f"I = {{{', '.join(sorted(self.interaction))}}}")
        return "\n".join(lines)


@dataclass(frozen=True)
class CoarseningViolation:
    rule: str
    variable: str
    action: str
    explanation: str


@dataclass(frozen=True)
class CoarseningVerdict:
    violations: tuple = ()

    @property
    def preserved(self) -> bool:
        return not self.violations

    def report(self) -> str:
        if self.preserved:
            return "preserved"
        return "\n".join(f"violation {v.rule} {v.variable} @ {v.action}: {v.explanation}"
                         for v in self.violations)


@dataclass(frozen=True)
class ProjectedTrace:
    variables: tuple
    steps: tuple  # tuple of value tuples aligned with ``variables``

    def __len__(self):
        return len(self.steps)

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.variables, st)) for st in self.steps]


@dataclass(frozen=True)
class OracleResult:
    equivalent: bool
    witness: ProjectedTrace | None = None
    witness_side: str | None = None  # "full" or "coarsened": where the witness occurs
    traces_full: int = 0
    traces_coarsened: int = 0
    max_len: int = 0

    def report(self) -> str:
        head = (f"{'equivalent' if self.equivalent else 'counterexample'} "
                f"(prefixes of <= {self.max_len} condensed steps; "
                f"full={self.traces_full}, coarsened={self.traces_coarsened})")
        if self.witness is None:
            return head
        body = [f"witness only in {self.witness_side}:"]
        for k, st in enumerate(self.witness.as_dicts()):
            body.append(f"  [{k}] {st}")
        return "\n".join([head] + body)


@dataclass
class OracleBounds:
    max_len: int = 12          # condensed steps per trace prefix
    max_traces: int = 100_000  # distinct projected prefixes per side
    max_states: int = 2_000_000


# ---------------------------------------------------------------------------
# classification

def _actions(m: ModuleSpec, declared: set | None):
    if declared is None:
        return m.actions
    return tuple(_specialize(a, declared) for a in m.actions)


def dependency_vars(m: ModuleSpec, declared: set | None = None) -> frozenset:
    """Guard variables of ``m``, closed under the assignments made in ``m``."""
    acts = _actions(m, declared)
    dep = set()
    for a in acts:
        dep |= set(a.reads)
    changed = True
    while changed:
        changed = False
        for a in acts:
            for v, deps in a.writes.items():
                if v in dep and not set(deps) <= dep:
                    dep |= set(deps)
                    changed = True
    return frozenset(dep)


def interaction_vars(modules: Iterable[ModuleSpec], dependency: Mapping[str, frozenset] | None = None,
                     declared: set | None = None) -> frozenset:
    """Least fixpoint of the three interaction rules.

    1. a dependency variable of two modules is an interaction variable;
    2. an assignment to an interaction variable pulls in the sources that
       lie outside the assigning module's dependency set;
    3. an assignment to a module's internal dependency variable, made by any
       action, pulls in the sources outside that module's dependency set.
    """
    modules = list(modules)
    if dependency is None:
        dependency = {m.name: dependency_vars(m, declared) for m in modules}
    acts = {m.name: _actions(m, declared) for m in modules}
    every = [(m.name, a) for m in modules for a in acts[m.name]]

    inter = set()
    names = [m.name for m in modules]
    for x in range(len(names)):
        for y in range(x + 1, len(names)):
            inter |= set(dependency[names[x]]) & set(dependency[names[y]])

    changed = True
    while changed:
        changed = False
        for owner, a in every:
            d_owner = dependency[owner]
            for v, deps in a.writes.items():
                if v in inter:
                    add = set(deps) - set(d_owner) - inter
                    if add:
                        inter |= add
                        changed = True
        for name in names:
            d = dependency[name]
            for _, a in every:
                for v, deps in a.writes.items():
                    if v in d and v not in inter:
                        add = set(deps) - set(d) - inter
                        if add:
                            inter |= add
                            changed = True
    return frozenset(inter)


def classify(modules: Iterable[ModuleSpec]) -> VariableClassification:
    """Dependency sets and interaction variables of a composition.

    Optional writes to variables no module declares are dropped first, as
    composition does.
    """
    modules = list(modules)
    declared = set()
    for m in modules:
        declared |= set(m.variables)
    dep = {m.name: dependency_vars(m, declared) for m in modules}
    return VariableClassification(dep, interaction_vars(modules, dep, declared))


# ---------------------------------------------------------------------------
# projection and condensation

def _projector(variables: Iterable[str]):
    names = tuple(sorted(variables))

    def proj(s: State) -> tuple:
        return tuple(s[v] if v in s else None for v in names)
    return names, proj


def project_and_condense(t: Trace, classification: VariableClassification, target: str) -> ProjectedTrace:
    """Restrict each state to what ``target`` observes and drop stuttering."""
    names, proj = _projector(classification.relevant(target))
    out = [proj(t.init)]
    for _, s in t.steps:
        p = proj(s)
        if p != out[-1]:
            out.append(p)
    return ProjectedTrace(names, tuple(out))


class _Explorer:
    """Successor cache plus stutter closure for one system and projection."""

    def __init__(self, sys_: ComposedSpec, proj, max_states: int):
        self.sys = sys_
        self.proj = proj
        self.max_states = max_states
        self._succ: dict[State, list] = {}

    def succ(self, s: State) -> list:
        out = self._succ.get(s)
        if out is None:
            if len(self._succ) >= self.max_states:
                raise BudgetExhausted(f"more than {self.max_states} states")
            out = [(inst, t) for inst, t in _successors(self.sys, s)]
            self._succ[s] = out
        return out

    def closure(self, states: Iterable[State], p: tuple) -> frozenset:
        seen = set(states)
        work = list(seen)
        while work:
            s = work.pop()
            for _, t in self.succ(s):
                if t not in seen and self.proj(t) == p:
                    seen.add(t)
                    work.append(t)
        return frozenset(seen)


def condensed_prefixes(sys_: ComposedSpec, variables: Iterable[str], bounds: OracleBounds) -> list[set]:
    """Distinct condensed projected prefixes, grouped by length.

    Works on sets of states sharing one projected history (a subset
    construction), so raw traces that condense to the same prefix are
    never enumerated separately.
    """
    _, proj = _projector(variables)
    ex = _Explorer(sys_, proj, bounds.max_states)
    start: dict[tuple, set] = {}
    for s in sys_.init:
        start.setdefault(proj(s), set()).add(s)
    frontier = {(p,): ex.closure(ss, p) for p, ss in start.items()}
    levels = [set(frontier)]
    total = len(frontier)
    for _ in range(bounds.max_len):
        nxt: dict[tuple, set] = {}
        for seq, states in frontier.items():
            last = seq[-1]
            for s in states:
                for _, t in ex.succ(s):
                    p = proj(t)
                    if p != last:
                        nxt.setdefault(seq + (p,), set()).add(t)
        total += len(nxt)
        if total > bounds.max_traces:
            raise BudgetExhausted(f"more than {bounds.max_traces} projected traces")
        frontier = {seq: ex.closure(ss, seq[-1]) for seq, ss in nxt.items()}
        levels.append(set(frontier))
        if not frontier:
            break
    return levels


def theorem_oracle(full: ComposedSpec, coarsened: ComposedSpec, target: str,
                   classification: VariableClassification,
                   bounds: OracleBounds | None = None) -> OracleResult:
    """Compare the condensed projected trace sets of two specs.

    Bounded approximation: both sides are compared as sets of prefixes of at
    most ``bounds.max_len`` condensed steps.  The reported witness is a
    shortest prefix present on exactly one side.
    """
    bounds = bounds or OracleBounds()
    names = tuple(sorted(classification.relevant(target)))
    a = condensed_prefixes(full, names, bounds)
    b = condensed_prefixes(coarsened, names, bounds)
    na, nb = sum(map(len, a)), sum(map(len, b))
    for k in range(max(len(a), len(b))):
        la = a[k] if k < len(a) else set()
        lb = b[k] if k < len(b) else set()
        if la != lb:
            only_a = sorted(la - lb, key=repr)
            if only_a:
                return OracleResult(False, ProjectedTrace(names, only_a[0]), "full", na, nb, bounds.max_len)
            only_b = sorted(lb - la, key=repr)
            return OracleResult(False, ProjectedTrace(names, only_b[0]), "coarsened", na, nb, bounds.max_len)
    return OracleResult(True, None, None, na, nb, bounds.max_len)


# ---------------------------------------------------------------------------
# coarsening check

def _touched(m: ModuleSpec, declared: set) -> set:
    out = set()
    for a in _actions(m, declared):
        out |= a.variables()
    return out


def _writers(m: ModuleSpec, v: str, declared: set) -> list[str]:
    return sorted(a.name for a in _actions(m, declared) if v in a.writes)


def _update_relation(sys_: ComposedSpec, module: str, proj, max_states: int) -> dict:
    """Reachable (pre, post) projections changed by ``module``'s actions."""
    seen = set(sys_.init)
    work = list(sys_.init)
    rel: dict[tuple, str] = {}
    while work:
        s = work.pop()
        ps = None
        for inst, t in _successors(sys_, s):
            if sys_.module_of(inst.name) == module:
                ps = proj(s) if ps is None else ps
                pt = proj(t)
                if pt != ps:
                    rel.setdefault((ps, pt), inst.name)
            if t not in seen:
                seen.add(t)
                if len(seen) > max_states:
                    raise BudgetExhausted(f"more than {max_states} states")
                work.append(t)
    return rel


def check_interaction_preserving(original: ModuleSpec, coarsened: ModuleSpec, context: Iterable[ModuleSpec],
                                 target: str, classification: VariableClassification | None,
                                 constants: Constants | None = None,
                                 max_states: int = 500_000) -> CoarseningVerdict:
    """Check that ``coarsened`` keeps the variables and updates ``target`` can observe.

    ``classification`` must cover ``original`` and every context module.
    The structural pass compares declared variables and written variables
    of ``D_target | I``.  Updates are opaque functions, so the update pass
    compares the reachable update relation on ``D_target | I`` of both
    compositions at ``constants`` (skipped when ``constants`` is None).
    """
    context = list(context)
    if original.name != coarsened.name:
        raise ValueError("original and coarsened must be variants of one module")
    if target == original.name:
        raise ValueError("the target module cannot be the coarsened one")
    if classification is None:
        raise ClassificationMissing("classification was not computed for this context")
    for m in context + [original]:
        if m.name not in classification.dependency:
            raise ClassificationMissing(f"no dependency set for module {m.name!r}")
    keep = classification.relevant(target)

    declared_o = set(original.variables)
    declared_c = set(coarsened.variables)
    for m in context:
        declared_o |= set(m.variables)
        declared_c |= set(m.variables)

    out: list[CoarseningViolation] = []
    touched = _touched(original, declared_o)
    for v in sorted(keep & touched):
        if v not in declared_c:
            out.append(CoarseningViolation(VARS_UNCHANGED, v, "*", f"{v} is no longer declared"))
    for v in sorted(keep):
        wo = _writers(original, v, declared_o)
        wc = _writers(coarsened, v, declared_c)
        if wo and not wc:
            out.append(CoarseningViolation(UPDATES_UNCHANGED, v, ",".join(wo),
                                           f"no coarsened action updates {v}"))
        elif wc and not wo:
            out.append(CoarseningViolation(UPDATES_UNCHANGED, v, ",".join(wc),
                                           f"{v} gains an update the original never makes"))
    if out or constants is None:
        return CoarseningVerdict(tuple(out))

    names, proj = _projector(keep)
    full = compose_modules(context + [original], constants)
    coarse = compose_modules(context + [coarsened], constants)
    ro = _update_relation(full, original.name, proj, max_states)
    rc = _update_relation(coarse, coarsened.name, proj, max_states)
    for side, a, b in (("original", ro, rc), ("coarsened", rc, ro)):
        missing = sorted(set(a) - set(b), key=repr)
        if missing:
            pre, post = missing[0]
            var = next(n for n, x, y in zip(names, pre, post) if x != y)
            other = "coarsened" if side == "original" else "original"
            out.append(CoarseningViolation(
                UPDATES_UNCHANGED, var, a[missing[0]],
                f"{len(missing)} reachable update(s) of the {side} module have no "
                f"counterpart in the {other} one"))
    return CoarseningVerdict(tuple(out))


def rename_module(m: ModuleSpec, name: str, granularity: str | None = None) -> ModuleSpec:
    """Same actions under another module name (for comparing merged views)."""
    acts = tuple(dataclasses.replace(a, module=name) for a in m.actions)
    return dataclasses.replace(m, name=name, granularity=granularity or m.granularity, actions=acts)
