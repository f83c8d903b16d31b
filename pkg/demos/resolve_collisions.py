"""Drop a few overlapping boxes into a room and let the optimizer separate them."""

import argparse
import random

from roomweave import RoomBounds, Scene, SceneObject, optimize, physical_metrics
from roomweave.executor import run_optimizer


def crowded(n, seed):
    rng = random.Random(seed)
    objs = []
    for k in range(n):
        size = (rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2), 0.8)
        loc = (rng.uniform(1.5, 2.5), rng.uniform(1.5, 2.5), 0.4)
        objs.append(SceneObject(f"box_{k}", "cabinet", loc, rng.uniform(0, 360), size))
    return Scene(RoomBounds(4.0, 4.0, 3.0, "office"), tuple(objs))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=6)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    s = crowded(args.n, args.seed)
    print("before:", physical_metrics(s).to_dict())
    result = run_optimizer(s)
    for line in result.log[:12]:
        print("  ", line)
    print(f"after {result.sweeps} sweeps:", result.residual.to_dict())
    _, residual = optimize(s)
    assert residual == result.residual


if __name__ == "__main__":
    main()
