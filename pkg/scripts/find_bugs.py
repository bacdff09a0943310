"""Hunt each seeded bug on its mixed-grained spec and save the evidence.

Writes <out>/<bug>.trace (model counterexample) and <out>/<bug>.json
(simulator scenario replaying the confirmed schedule).

    python3 scripts/find_bugs.py [--out scenarios] [BUG ...]
"""

import argparse
import sys

from mgcheck.bugs import TARGETS, hunt
from mgcheck.sim import save_scenario
from mgcheck.traceio import write_trace
from pathlib import Path


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("bugs", nargs="*", default=sorted(TARGETS))
    p.add_argument("--out", default="scenarios")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for bug in args.bugs:
        h = hunt(bug)
        print(h.summary(), flush=True)
        if not h.confirmed:
            failed += 1
            continue
        write_trace(out / f"{bug}.trace", h.trace)
        save_scenario(out / f"{bug}.json", h.scenario())
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
