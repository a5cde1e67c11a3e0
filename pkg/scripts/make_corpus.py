#!/usr/bin/env python3
"""Render the deterministic synthetic digit corpus as canonical IDX files.

Drop-in stand-in for environments without the real 28x28 corpus; the rest of
the pipeline loads it through the same IDX parser either way.
"""

import argparse

from hourglass_mlp.synth import write_synthetic_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory (default: ./data)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-train", type=int, default=60000)
    parser.add_argument("--n-test", type=int, default=10000)
    args = parser.parse_args()
    paths = write_synthetic_corpus(args.out, seed=args.seed, n_train=args.n_train, n_test=args.n_test)
    for key in sorted(paths):
        print(f"{key}: {paths[key]}")


if __name__ == "__main__":
    main()
