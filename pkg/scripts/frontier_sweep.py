#!/usr/bin/env python3
"""Desk-scale Pareto sweep: hourglass vs conventional on denoising.

Runs the reduced architecture grid for both block shapes (3 seeds each),
extracts both non-dominated frontiers, and reports where the hourglass
frontier weakly dominates at matched trainable-parameter budgets. The result
store is crash-resumable; re-running continues where it stopped.
"""

import argparse
import os

import numpy as np

from hourglass_mlp.search import SearchSpace, aggregate, enumerate_configs, run_search, write_frontier
from hourglass_mlp.trainer import TrainConfig

from projection_ablation import Protocol, load_task


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-root", default=os.environ.get("HOURGLASS_DATA_ROOT", "data"))
    parser.add_argument("--out", default="runs/frontier_sweep")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    protocol = Protocol()
    task = load_task(args.data_root, protocol)
    os.makedirs(args.out, exist_ok=True)
    cfg = TrainConfig(epochs=protocol.epochs, batch_size=protocol.batch_size, base_lr=protocol.lr)

    spaces = {
        "hourglass": SearchSpace("hourglass", (1176, 1568), (16, 64, 256), (2, 4), (protocol.lr,)),
        "conventional": SearchSpace("conventional", (784,), (1176, 1568, 2352), (1, 2), (protocol.lr,)),
    }
    fronts = {}
    for name, space in spaces.items():
        candidates = enumerate_configs(space, d_x=784, d_out=784, projection="trainable")
        print(f"{name}: {len(candidates)} configurations x {args.repeats} seeds")
        rows = run_search(
            candidates,
            task,
            cfg,
            os.path.join(args.out, f"results_{name}.csv"),
            repeats=args.repeats,
            base_seed=0,
            n_workers=args.workers,
        )
        aggs = aggregate(rows)
        fronts[name] = write_frontier(os.path.join(args.out, f"frontier_{name}.csv"), aggs)
        for point in fronts[name]:
            print(
                f"  {point.params_trainable / 1e6:7.3f}M  {point.mean_metric:6.3f}"
                f" +- {point.std_metric:.3f} dB   [{point.config_id}]"
            )

    hp = np.array([p.params_trainable for p in fronts["hourglass"]], dtype=np.float64)
    hm = np.array([p.mean_metric for p in fronts["hourglass"]])
    cp = np.array([p.params_trainable for p in fronts["conventional"]], dtype=np.float64)
    cm = np.array([p.mean_metric for p in fronts["conventional"]])
    lo, hi = max(hp.min(), cp.min()), min(hp.max(), cp.max())
    budgets = np.unique(np.concatenate([hp, cp]))
    budgets = budgets[(budgets >= lo) & (budgets <= hi)]
    wins = (np.interp(budgets, hp, hm) >= np.interp(budgets, cp, cm) - 1e-9).mean()
    print(f"\nhourglass weakly dominates at {wins:.0%} of {budgets.size} matched budgets")


if __name__ == "__main__":
    main()
