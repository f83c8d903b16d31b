"""Run the scripted planner on a few room types and print a metrics table.

    python demos/scripted_rooms.py --out /tmp/rooms
"""

import argparse
import logging
from pathlib import Path

from roomweave import default_registry, physical_metrics, render_topdown, run_loop
from roomweave.toolkit import ToolEnv

ROOMS = ("bedroom", "living room", "kitchen", "office")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, help="write final SVGs here")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    reg = default_registry()
    print(f"{'room':<12} {'steps':>5} {'obj':>4} {'ob':>3} {'cn':>3}  tools")
    for room in ROOMS:
        q = f"Design me a {room}"
        res = run_loop(q, reg, env=ToolEnv(seed=args.seed, query=q))
        pm = physical_metrics(res.final)
        tools = " ".join(r.decision.chosen for r in res.steps)
        print(f"{room:<12} {len(res.steps):>5} {pm.obj_count:>4} {pm.out_of_boundary:>3} "
              f"{pm.collision_pairs:>3}  {tools}")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{room.replace(' ', '_')}.svg").write_text(render_topdown(res.final).content)


if __name__ == "__main__":
    main()
