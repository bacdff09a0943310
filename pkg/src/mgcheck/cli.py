"""Command-line entry point: ``mgcheck <command> [options]``.

Exit status: 0 clean, 1 violations or discrepancies found, 2 usage or
semantic error.  Every artifact goes under ``--output-dir``; only the first
line of a report carries a timestamp.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import toys
from .algebra import (ComposedSpec, CompositionError, CompositionPlan, Constants, compose,
                      compose_modules, list_variants, load_plan, merge_modules)
from .conformance import (UnmappedAction, conformance_check, confirm_violation, mark_known_buggy,
                          replay)
from .interaction import (BudgetExhausted, OracleBounds, check_interaction_preserving, classify,
                          theorem_oracle)
from .kernel import ExplorationBounds, bfs_check
from .sim import BugFlags, SimError, load_scenario, new_cluster, observe, step
from .traceio import read_trace, write_trace
from .zab import LIBRARY, PRESETS, preset_plan
from .zab.invariants import BUG_IDS

COMMANDS = ("check", "compose", "analyze", "conform", "replay", "describe")
CLEAN, FOUND, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    plan_file: str | None = None
    preset: str | None = None
    scenario_file: str | None = None
    trace_file: str | None = None
    seed: int = 0
    nodes: int | None = None
    max_txns: int | None = None
    max_crashes: int | None = None
    max_partitions: int | None = None
    max_states: int | None = None
    max_depth: int | None = None
    time_limit: float | None = None
    stop: str = "first"
    workers: int = 1
    invariants: str = "all"
    only: list = field(default_factory=list)
    prune_known: list = field(default_factory=list)
    flags: list | None = None
    traces: int = 200
    max_steps: int = 30
    target: str | None = None
    coarsen: list = field(default_factory=list)
    toy: str | None = None
    mutant: bool = False
    oracle: bool = False
    oracle_len: int = 12
    confirm: str | None = None
    output_dir: str = "mgcheck-out"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.plan_file and self.preset:
            raise UsageError("give either --plan or --preset, not both")
        needs_spec = self.command in ("check", "compose", "conform") or (
            self.command == "analyze" and not self.toy) or (self.command == "replay" and self.trace_file)
        if needs_spec and not (self.plan_file or self.preset):
            raise UsageError(f"{self.command} needs --plan or --preset")
        if self.preset and self.preset not in PRESETS:
            raise UsageError(f"unknown preset {self.preset!r} (known: {', '.join(PRESETS)})")
        for name in ("plan_file", "scenario_file", "trace_file"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                raise UsageError(f"no such file: {path}")
        if self.command == "analyze":
            if self.toy:
                if self.toy not in {t.name for t in toys.toy_cases()}:
                    raise UsageError(f"unknown toy {self.toy!r}")
            elif not (self.target and self.coarsen):
                raise UsageError("analyze needs --target and at least one --coarsen MODULE=VARIANT")
            for c in self.coarsen:
                if "=" not in c:
                    raise UsageError(f"--coarsen expects MODULE=VARIANT, got {c!r}")
        if self.command == "replay" and not (self.trace_file or self.scenario_file):
            raise UsageError("replay needs --trace or --scenario")
        if self.confirm and not self.trace_file:
            raise UsageError("--confirm needs --trace")
        if self.flags:
            unknown = sorted(set(self.flags) - set(BugFlags().__dataclass_fields__))
            if unknown:
                raise UsageError(f"unknown bug flag(s): {', '.join(unknown)}")
        if self.workers < 1:
            raise UsageError("--workers must be at least 1")
        try:
            _stop(self.stop)
        except ValueError as e:
            raise UsageError(str(e)) from None


def _stop(text: str):
    if text in ("first", "complete"):
        return text
    if text.startswith("limit="):
        n = int(text.split("=", 1)[1])
        if n < 1:
            raise ValueError("limit must be positive")
        return ("limit", n)
    raise ValueError(f"bad --stop {text!r} (first, complete or limit=N)")


# -- helpers -------------------------------------------------------------------------

def _plan(cfg: RunConfig) -> CompositionPlan:
    plan = load_plan(cfg.plan_file) if cfg.plan_file else preset_plan(cfg.preset)
    over = {k: getattr(cfg, k) for k in ("nodes", "max_txns", "max_crashes", "max_partitions")
            if getattr(cfg, k) is not None}
    return plan.with_constants(**over) if over else plan


def _spec(cfg: RunConfig) -> ComposedSpec:
    return compose(_plan(cfg), LIBRARY)


def _flags(cfg: RunConfig) -> BugFlags | None:
    if cfg.flags is None:
        return None
    return BugFlags.of(*cfg.flags)


def _out(cfg: RunConfig) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_report(path: Path, command: str, body: str) -> None:
    stamp = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
    path.write_text(f"# mgcheck {command} {stamp}\n{body.rstrip()}\n")


def _constants_line(c: Constants) -> str:
    return (f"nodes={c.nodes} max_txns={c.max_txns} max_crashes={c.max_crashes} "
            f"max_partitions={c.max_partitions}")


def _selected_invariants(cfg: RunConfig, spec: ComposedSpec) -> list:
    invs = list(spec.invariants)
    if cfg.invariants == "protocol":
        invs = [i for i in invs if i.level == "protocol"]
    elif cfg.invariants == "code":
        invs = [i for i in invs if i.level != "protocol"]
    if cfg.only:
        invs = [i for i in invs if any(i.id == p or i.id.startswith(p) for p in cfg.only)]
    if not invs:
        raise UsageError("no invariants selected")
    return invs


# -- commands ------------------------------------------------------------------------

def cmd_check(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    invs = _selected_invariants(cfg, spec)
    bounds = ExplorationBounds(cfg.max_states, cfg.max_depth, cfg.time_limit)
    prune = mark_known_buggy(cfg.prune_known) if cfg.prune_known else None
    t0 = time.monotonic()
    r = bfs_check(spec, invs, bounds, stop=_stop(cfg.stop), workers=cfg.workers, prune=prune)
    elapsed = time.monotonic() - t0
    out = _out(cfg)
    for old in out.glob("violation-*.trace"):
        old.unlink()
    written = []
    seen = set()
    for inv_id, tr in r.violations:
        if inv_id in seen:
            continue
        seen.add(inv_id)
        name = f"violation-{len(written) + 1:03d}-{inv_id}.trace"
        write_trace(out / name, tr)
        written.append((name, inv_id, len(tr)))
    lines = [f"plan: {_plan(cfg).name or cfg.plan_file}", _constants_line(spec.constants),
             f"invariants: {len(invs)}", f"outcome: {r.outcome}",
             f"distinct states: {r.distinct_states}", f"states explored: {r.states_explored}",
             f"max depth: {r.max_depth}"]
    lines += [f"violations of {k}: {n}" for k, n in sorted(r.violation_counts.items())]
    lines += [f"trace {name}: {inv_id}, {n} steps" for name, inv_id, n in written]
    body = "\n".join(lines)
    _write_report(out / "check.txt", "check", body)
    print(body)
    print(f"elapsed: {elapsed:.1f}s")
    return FOUND if r.violations else CLEAN


def cmd_compose(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    lines = [_constants_line(spec.constants), "modules:"]
    lines += [f"  {m.name}: {m.granularity} ({len(m.actions)} actions)" for m in spec.modules]
    lines.append(f"variables ({len(spec.variables)}): {', '.join(sorted(spec.variables))}")
    lines.append(f"actions ({len(spec.actions)}):")
    lines += [f"  {a.name} [{a.module}]" for a in sorted(spec.actions, key=lambda a: (a.module, a.name))]
    lines.append(f"invariants ({len(spec.invariants)}):")
    lines += [f"  {i.id} ({i.level}, {i.kind})" for i in spec.invariants]
    print("\n".join(lines))
    return CLEAN


def _analysis_inputs(cfg: RunConfig):
    if cfg.toy:
        case = {t.name: t for t in toys.toy_cases()}[cfg.toy]
        coarse = case.mutant if cfg.mutant else case.coarsened
        if coarse is None:
            raise UsageError(f"toy {cfg.toy} has no mutant coarsening")
        c = Constants(nodes=2, max_txns=0)
        return case.original, coarse, [case.target], case.target.name, c
    spec = _spec(cfg)
    (pair,) = cfg.coarsen[:1]
    if len(cfg.coarsen) > 1:
        raise UsageError("analyze coarsens one module at a time")
    name, variant = pair.split("=", 1)
    coarse = LIBRARY.get(name, variant)
    parts = LIBRARY.covers.get(name, frozenset({name}))
    originals = [m for m in spec.modules if m.name in parts]
    if not originals:
        raise UsageError(f"plan selects none of the modules {name} replaces")
    if cfg.target in parts or cfg.target not in {m.name for m in spec.modules}:
        raise UsageError(f"target {cfg.target!r} must be another module of the plan")
    original = originals[0] if len(originals) == 1 and originals[0].name == name else \
        merge_modules(name, "+".join(m.granularity for m in originals), originals)
    context = [m for m in spec.modules if m.name not in parts]
    return original, coarse, context, cfg.target, spec.constants


def cmd_analyze(cfg: RunConfig) -> int:
    original, coarse, context, target, c = _analysis_inputs(cfg)
    cl = classify([original] + list(context))
    lines = [_constants_line(c), f"target: {target}",
             f"coarsening: {original.name}/{original.granularity} -> {coarse.name}/{coarse.granularity}",
             cl.report()]
    bad = False
    try:
        verdict = check_interaction_preserving(original, coarse, context, target, cl, c,
                                               max_states=cfg.max_states or 500_000)
        lines.append("rules: " + verdict.report())
        bad |= not verdict.preserved
    except BudgetExhausted as e:
        lines.append(f"rules: inconclusive ({e})")
    if cfg.oracle:
        full = compose_modules([original] + list(context), c)
        coarsened = compose_modules([coarse] + list(context), c)
        bounds = OracleBounds(max_len=cfg.oracle_len)
        try:
            res = theorem_oracle(full, coarsened, target, cl, bounds)
            lines.append("oracle: " + res.report())
            bad |= not res.equivalent
        except BudgetExhausted as e:
            lines.append(f"oracle: inconclusive ({e})")
    body = "\n".join(lines)
    _write_report(_out(cfg) / "analysis.txt", "analyze", body)
    print(body)
    return FOUND if bad else CLEAN


def cmd_conform(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    rep = conformance_check(spec, cfg.traces, cfg.max_steps, cfg.seed, _flags(cfg))
    body = f"{_constants_line(spec.constants)}\nseed: {cfg.seed}\n{rep.report()}"
    _write_report(_out(cfg) / "conformance.txt", "conform", body)
    print(body)
    return FOUND if rep.discrepancies else CLEAN


def cmd_replay(cfg: RunConfig) -> int:
    flags = _flags(cfg)
    if cfg.scenario_file:
        sc = load_scenario(cfg.scenario_file)
        flags = sc.flags if flags is None else flags
    if cfg.trace_file:
        spec = _spec(cfg)
        trace = read_trace(cfg.trace_file)
        if cfg.confirm:
            conf = confirm_violation(spec, trace, cfg.confirm, flags)
            body = conf.report()
            found = conf.confirmed
        else:
            res = replay(spec, trace, flags)
            body = res.report()
            found = not res.conformant
    else:
        cl = new_cluster(dataclasses.replace(sc, prefix=()))
        lines = [f"nodes={sc.nodes} flags={','.join(sc.flags.enabled()) or 'none'}"]
        for k, e in enumerate(sc.prefix, 1):
            if not cl.can_apply(e):
                lines.append(f"{k}: {e} not enabled")
                break
            cl = step(cl, e)
            lines.append(f"{k}: {e}")
        lines += [f"fault: node {n}: {msg}" for n, msg in cl.faults]
        obs = observe(cl).as_dict()
        lines += [f"{k} = {obs[k]!r}" for k in sorted(obs)]
        body = "\n".join(lines)
        found = bool(cl.faults)
    _write_report(_out(cfg) / "replay.txt", "replay", body)
    print(body)
    return FOUND if found else CLEAN


def cmd_describe(cfg: RunConfig) -> int:
    lines = ["presets:"]
    for name, sel in PRESETS.items():
        lines.append(f"  {name}: " + ", ".join(f"{m}={g}" for m, g in sorted(sel.items())))
    lines.append("modules:")
    for name, variants in list_variants(LIBRARY).items():
        lines.append(f"  {name}: {', '.join(variants)}")
    lines.append("bug flags: " + ", ".join(BugFlags().__dataclass_fields__))
    lines.append("seeded bug invariants: " + ", ".join(sorted(BUG_IDS)))
    print("\n".join(lines))
    return CLEAN


HANDLERS = {"check": cmd_check, "compose": cmd_compose, "analyze": cmd_analyze,
            "conform": cmd_conform, "replay": cmd_replay, "describe": cmd_describe}


# -- argument parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mgcheck", description="Multi-grained model checking of Zab.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec=True):
        if spec:
            sp.add_argument("--plan", dest="plan_file", help="plan file (JSON)")
            sp.add_argument("--preset", help="built-in plan name, see 'describe'")
            sp.add_argument("--nodes", type=int)
            sp.add_argument("--max-txns", type=int)
            sp.add_argument("--max-crashes", type=int)
            sp.add_argument("--max-partitions", type=int)
        sp.add_argument("--output-dir", default="mgcheck-out")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("check", help="exhaustive breadth-first check of a composed spec")
    common(sp)
    sp.add_argument("--stop", default="first", help="first, complete or limit=N")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--max-states", type=int)
    sp.add_argument("--max-depth", type=int)
    sp.add_argument("--time-limit", type=float)
    sp.add_argument("--invariants", choices=("all", "protocol", "code"), default="all")
    sp.add_argument("--only", action="append", default=[], metavar="ID",
                    help="check only invariants with this id or id prefix (repeatable)")
    sp.add_argument("--prune-known", action="append", default=[], metavar="ID",
                    help="do not explore past violations of this invariant (repeatable)")

    sp = sub.add_parser("compose", help="validate a plan and list its inventory")
    common(sp)

    sp = sub.add_parser("analyze", help="interaction-preservation analysis of a coarsening")
    common(sp)
    sp.add_argument("--target", help="module whose view must be preserved")
    sp.add_argument("--coarsen", action="append", default=[], metavar="MODULE=VARIANT")
    sp.add_argument("--toy", help="analyse a built-in toy system instead of a plan")
    sp.add_argument("--mutant", action="store_true", help="use the toy's rule-violating coarsening")
    sp.add_argument("--oracle", action="store_true", help="also compare projected traces exhaustively")
    sp.add_argument("--oracle-len", type=int, default=12)
    sp.add_argument("--max-states", type=int)

    sp = sub.add_parser("conform", help="replay random spec traces in the simulator")
    common(sp)
    sp.add_argument("--traces", type=int, default=200)
    sp.add_argument("--max-steps", type=int, default=30)
    sp.add_argument("--flags", nargs="*", help="bug flags to enable (default: by granularity)")

    sp = sub.add_parser("replay", help="replay a trace file or a scenario in the simulator")
    common(sp)
    sp.add_argument("--trace", dest="trace_file")
    sp.add_argument("--scenario", dest="scenario_file")
    sp.add_argument("--confirm", metavar="ID", help="confirm a violation of this invariant")
    sp.add_argument("--flags", nargs="*")

    sp = sub.add_parser("describe", help="list presets, module variants and bug flags")
    common(sp, spec=False)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    known = {f.name for f in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in known})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else CLEAN
    cfg = config_from_args(ns)
    try:
        cfg.validate()
        return HANDLERS[cfg.command](cfg)
    except (UsageError, CompositionError, UnmappedAction, SimError, KeyError, ValueError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"mgcheck: error: {msg}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
