"""Write every built-in composition plan as JSON, ready for ``mgcheck --plan``.

    python3 scripts/export_plans.py [--out plans] [--nodes 3 --max-txns 2 ...]
"""

import argparse
from pathlib import Path

from mgcheck.algebra import Constants, save_plan
from mgcheck.zab import PRESETS, preset_plan


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="plans")
    p.add_argument("--nodes", type=int, default=3)
    p.add_argument("--max-txns", type=int, default=2)
    p.add_argument("--max-crashes", type=int, default=2)
    p.add_argument("--max-partitions", type=int, default=1)
    args = p.parse_args()
    c = Constants(args.nodes, args.max_txns, args.max_crashes, args.max_partitions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in PRESETS:
        path = out / f"{name}.json"
        save_plan(path, preset_plan(name, c))
        print(path)


if __name__ == "__main__":
    main()
