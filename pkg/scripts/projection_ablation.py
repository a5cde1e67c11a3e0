#!/usr/bin/env python3
"""Fixed vs trainable input projection on desk-scale denoising.

Trains the same hourglass stack with the projection frozen at its random
initialization and with it trained end-to-end, over several seeds, and prints
the per-mode mean +- std test PSNR. Both modes start from bitwise-identical
projection values for a given seed.
"""

import argparse
import os
from dataclasses import dataclass

from hourglass_mlp.data import TaskSpec, build_task, load_idx, split
from hourglass_mlp.model import ArchConfig
from hourglass_mlp.search import Candidate, aggregate, candidate_hash, run_search
from hourglass_mlp.synth import TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS
from hourglass_mlp.trainer import TrainConfig


@dataclass(frozen=True)
class Protocol:
    d_x: int = 784
    d_z: int = 1568
    d_h: int = 64
    L: int = 4
    epochs: int = 3
    batch_size: int = 128
    lr: float = 1e-3
    noise_std: float = 0.25
    repeats: int = 3


def load_task(data_root: str, protocol: Protocol):
    train_set = load_idx(os.path.join(data_root, TRAIN_IMAGES), os.path.join(data_root, TRAIN_LABELS))
    test_set = load_idx(os.path.join(data_root, TEST_IMAGES), os.path.join(data_root, TEST_LABELS))
    splits = split(train_set, test_set, seed=0)
    return build_task(splits, TaskSpec(task="denoise", noise_std=protocol.noise_std), noise_seed=0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-root", default=os.environ.get("HOURGLASS_DATA_ROOT", "data"))
    parser.add_argument("--out", default="runs/projection_ablation")
    parser.add_argument("--repeats", type=int, default=Protocol.repeats)
    args = parser.parse_args()

    protocol = Protocol(repeats=args.repeats)
    task = load_task(args.data_root, protocol)
    os.makedirs(args.out, exist_ok=True)

    candidates = []
    for projection in ("fixed", "trainable"):
        arch = ArchConfig(
            variant="hourglass",
            d_x=protocol.d_x,
            d_z=protocol.d_z,
            d_h=protocol.d_h,
            L=protocol.L,
            d_out=protocol.d_x,
            projection=projection,
            seed=0,
        )
        candidates.append(Candidate(arch, protocol.lr, candidate_hash(arch, protocol.lr)))

    cfg = TrainConfig(epochs=protocol.epochs, batch_size=protocol.batch_size, base_lr=protocol.lr)
    rows = run_search(
        candidates,
        task,
        cfg,
        os.path.join(args.out, "results.csv"),
        repeats=protocol.repeats,
        base_seed=0,
    )
    by_hash = {c.config_hash: c.arch.projection for c in candidates}
    print(f"\n{'mode':<12} {'params':>10} {'PSNR (mean +- std dB)':>24}")
    means = {}
    for agg in aggregate(rows):
        mode = by_hash[agg.config_hash]
        means[mode] = agg.mean
        print(f"{mode:<12} {agg.params_trainable:>10} {agg.mean:>16.3f} +- {agg.std:.3f}")
    if len(means) == 2:
        print(f"\ngap: {abs(means['fixed'] - means['trainable']):.3f} dB")


if __name__ == "__main__":
    main()
