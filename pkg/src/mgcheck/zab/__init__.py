"""Zab at several granularities, plus presets for the mixed-grained specs."""

from __future__ import annotations

import dataclasses

from ..algebra import CompositionPlan, ComposedSpec, Constants, Library, ModuleSpec, compose
from . import broadcast, election, faults, sync
from .invariants import BUG_IDS, CODE, PROTOCOL, code_invariants, invariant_suite

SYNC_VARIANTS = {
    "protocol": sync.PROTOCOL,
    "baseline": sync.BASELINE,
    "fine-atomicity": sync.FINE_ATOMICITY,
    "fine-atomicity+concurrency": sync.FINE_CONCURRENCY,
    "improved": sync.IMPROVED,
}


def _with_invariants(m: ModuleSpec) -> ModuleSpec:
    return dataclasses.replace(m, invariants=tuple(PROTOCOL) + code_invariants(m.granularity))


def module_library() -> Library:
    mods = [election.ELECTION_BASELINE, election.DISCOVERY_BASELINE, election.COARSE,
            broadcast.BASELINE, broadcast.FINE_CONCURRENCY, faults.FAULTS]
    mods += [_with_invariants(m) for m in SYNC_VARIANTS.values()]
    return Library(mods, always=("Faults",),
                   covers={"ElectionAndDiscovery": ("Election", "Discovery")})


LIBRARY = module_library()

PRESETS = {
    "SysSpec": {"Election": "baseline", "Discovery": "baseline",
                "Synchronization": "baseline", "Broadcast": "baseline"},
    "mSpec-1": {"ElectionAndDiscovery": "coarse", "Synchronization": "baseline", "Broadcast": "baseline"},
    "mSpec-2": {"ElectionAndDiscovery": "coarse", "Synchronization": "fine-atomicity",
                "Broadcast": "baseline"},
    "mSpec-3": {"ElectionAndDiscovery": "coarse", "Synchronization": "fine-atomicity+concurrency",
                "Broadcast": "fine-concurrency"},
    "mSpec-4": {"Election": "baseline", "Discovery": "baseline",
                "Synchronization": "fine-atomicity+concurrency", "Broadcast": "fine-concurrency"},
    "Protocol": {"ElectionAndDiscovery": "coarse", "Synchronization": "protocol", "Broadcast": "baseline"},
    "Protocol-improved": {"ElectionAndDiscovery": "coarse", "Synchronization": "improved",
                          "Broadcast": "baseline"},
}

LEVELS = {"baseline": "SysSpec", 0: "SysSpec", 1: "mSpec-1", 2: "mSpec-2", 3: "mSpec-3", 4: "mSpec-4"}


def preset_plan(name: str, constants: Constants = Constants()) -> CompositionPlan:
    return CompositionPlan(dict(PRESETS[name]), constants, name)


def build_mspec(level, constants: Constants = Constants(), validate: bool = False) -> ComposedSpec:
    """Table-style presets: ``"baseline"`` (SysSpec) or 1..4."""
    key = level if level == "baseline" else int(level)
    if key not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    return compose(preset_plan(LEVELS[key], constants), LIBRARY, validate)


def protocol_spec(improved: bool = False, constants: Constants = Constants(),
                  validate: bool = False) -> ComposedSpec:
    name = "Protocol-improved" if improved else "Protocol"
    return compose(preset_plan(name, constants), LIBRARY, validate)


__all__ = ["LIBRARY", "PRESETS", "BUG_IDS", "CODE", "PROTOCOL", "build_mspec", "protocol_spec",
           "module_library", "preset_plan", "invariant_suite", "code_invariants", "SYNC_VARIANTS"]
