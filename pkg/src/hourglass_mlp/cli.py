"""Command-line entry point.

Subcommands: train, search, pareto, eval, gen-data, gradcheck. Config files
are flat key=value text with dotted sections; precedence is
CLI flag > config file > built-in default. Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, synth
from .config import Resolver, dump_config, load_config_file
from .data import (
    Splits,
    TaskSpec,
    build_task,
    load_idx,
    split,
    write_raw_tensor,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DomainError,
    HourglassError,
    NumericsError,
)
from .model import ArchConfig
from .search import (
    Candidate,
    SearchSpace,
    aggregate,
    candidate_hash,
    enumerate_configs,
    read_results,
    result_row,
    run_search,
    write_frontier,
    write_results,
)
from .trainer import TrainConfig, evaluate, train

DATA_ROOT_ENV = "HOURGLASS_DATA_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------------------
# config section loaders


def _load_arch(res: Resolver) -> ArchConfig:
    return ArchConfig(
        variant=res.get_str("arch.variant", required=True),
        d_x=res.get_int("arch.d_x", required=True),
        d_z=res.get_int("arch.d_z", required=True),
        d_h=res.get_int("arch.d_h", required=True),
        L=res.get_int("arch.L", required=True),
        d_out=res.get_int("arch.d_out", required=True),
        head=res.get_str("arch.head", "image"),
        projection=res.get_str("arch.projection", "trainable"),
        distribution=res.get_str("arch.distribution", "gaussian"),
        activation=res.get_str("arch.activation", "gelu"),
        seed=res.get_int("arch.seed", 0),
    )


def _load_task_spec(res: Resolver) -> TaskSpec:
    return TaskSpec(
        task=res.get_str("task.kind", required=True),
        noise_std=res.get_float("task.noise_std", 0.25),
        downscale=res.get_int("task.downscale", 2),
        augment=res.get_bool("task.augment", False),
        prototype_seed=res.get_int("task.prototype_seed", 0),
    )


def _load_train_cfg(res: Resolver) -> TrainConfig:
    return TrainConfig(
        epochs=res.get_int("train.epochs", required=True),
        batch_size=res.get_int("train.batch_size", 128),
        base_lr=res.get_float("train.base_lr", 1e-3),
        beta1=res.get_float("train.beta1", 0.9),
        beta2=res.get_float("train.beta2", 0.999),
        eps=res.get_float("train.eps", 1e-8),
        weight_decay=res.get_float("train.weight_decay", 0.01),
        eval_every=res.get_int("train.eval_every", None),
        seed=res.get_int("train.seed", 0),
    )


def _data_root(res: Resolver, args, config_path) -> str:
    from_file = res.get_str("data.root", None)
    root = getattr(args, "data_root", None) or from_file or os.environ.get(DATA_ROOT_ENV)
    if not root:
        root = os.path.dirname(os.path.abspath(config_path))
    res.resolved["data.root"] = root
    return root


def _resolve_path(root: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(root, path)


def _open_corpus(res: Resolver, root: str) -> Splits:
    paths = {
        "train_images": res.get_str("data.train_images", synth.TRAIN_IMAGES),
        "train_labels": res.get_str("data.train_labels", synth.TRAIN_LABELS),
        "test_images": res.get_str("data.test_images", synth.TEST_IMAGES),
        "test_labels": res.get_str("data.test_labels", synth.TEST_LABELS),
    }
    resolved = {k: _resolve_path(root, v) for k, v in paths.items()}
    for name, path in resolved.items():
        if not os.path.exists(path):
            raise DataError(f"dataset file not found: {path} (data.{name})")
    train_set = load_idx(resolved["train_images"], resolved["train_labels"])
    test_set = load_idx(resolved["test_images"], resolved["test_labels"])
    return split(
        train_set,
        test_set,
        seed=res.get_int("data.split_seed", 0),
        train_size=res.get_int("data.train_size", 50000),
        val_size=res.get_int("data.val_size", 10000),
    )


def _load_task(res: Resolver, root: str):
    splits = _open_corpus(res, root)
    spec = _load_task_spec(res)
    limits = (
        res.get_int("data.limit_train", None),
        res.get_int("data.limit_val", None),
        res.get_int("data.limit_test", None),
    )
    noise_seed = res.get_int("task.noise_seed", 0)
    return build_task(splits, spec, noise_seed=noise_seed, limits=limits)


def _check_task_dims(task, d_x: int, d_out: int) -> None:
    got_x = task.train.images.shape[1]
    got_out = task.train.targets.shape[1]
    if (got_x, got_out) != (d_x, d_out):
        raise ConfigError(
            f"task produces {got_x}-wide inputs and {got_out}-wide targets, but the "
            f"architecture declares arch.d_x={d_x}, arch.d_out={d_out}"
        )


def _write_manifest(out_dir, config_path, resolved: dict) -> None:
    lines = [
        f"config_path={os.path.abspath(config_path)}",
        f"output_dir={os.path.abspath(out_dir)}",
        f"timestamp={datetime.now(timezone.utc).isoformat()}",
        f"tool_version={__version__}",
        "--- resolved config ---",
    ]
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n" + dump_config(resolved))


def _prepare_out_dir(out_dir, overwrite: bool, hint: str = "--overwrite") -> None:
    if os.path.exists(out_dir) and not overwrite:
        raise ConfigError(f"output directory {out_dir} already exists; pass {hint}")
    os.makedirs(out_dir, exist_ok=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    kv = load_config_file(args.config)
    res = Resolver(kv)
    _prepare_out_dir(args.out, args.overwrite)
    root = _data_root(res, args, args.config)
    arch = _load_arch(res)
    cfg = _load_train_cfg(res)
    task = _load_task(res, root)
    _check_task_dims(task, arch.d_x, arch.d_out)
    res.reject_unknown()
    _write_manifest(args.out, args.config, res.resolved)

    checkpoint = os.path.join(args.out, "best.ckpt")
    result = train(arch, task, cfg, checkpoint_path=checkpoint)
    cand = Candidate(arch, cfg.base_lr, candidate_hash(arch, cfg.base_lr))
    write_results(os.path.join(args.out, "results.csv"), [result_row(cand, result)])
    if result.status != "ok":
        print("training aborted: non-finite loss", file=sys.stderr)
        return EXIT_NUMERIC
    rep = result.final
    print(
        f"status=ok params_trainable={result.params_trainable} "
        f"test_mse={rep.mse:.6g} test_psnr_db={rep.psnr_db:.4f} test_ssim={rep.ssim:.4f}"
        + (f" test_accuracy={rep.accuracy:.4f}" if rep.accuracy is not None else "")
    )
    return EXIT_OK


def cmd_search(args) -> int:
    kv = load_config_file(args.config)
    res = Resolver(kv)
    results_path = os.path.join(args.out, "results.csv")
    if os.path.exists(args.out) and not (args.resume or args.overwrite):
        raise ConfigError(f"output directory {args.out} already exists; pass --resume or --overwrite")
    os.makedirs(args.out, exist_ok=True)
    if args.overwrite and os.path.exists(results_path):
        os.remove(results_path)

    root = _data_root(res, args, args.config)
    space = SearchSpace(
        variant=res.get_str("search.variant", required=True),
        d_z_values=tuple(res.get_int_list("search.d_z", required=True)),
        d_h_values=tuple(res.get_int_list("search.d_h", required=True)),
        L_values=tuple(res.get_int_list("search.L", required=True)),
        lr_values=tuple(res.get_float_list("search.lr", required=True)),
        repeats=res.get_int("search.repeats", 5),
    )
    candidates = enumerate_configs(
        space,
        d_x=res.get_int("arch.d_x", required=True),
        d_out=res.get_int("arch.d_out", required=True),
        budget_cap=res.get_int("search.budget_cap", None),
        head=res.get_str("arch.head", "image"),
        projection=res.get_str("arch.projection", "trainable"),
        distribution=res.get_str("arch.distribution", "gaussian"),
        activation=res.get_str("arch.activation", "gelu"),
        arch_seed=res.get_int("arch.seed", 0),
    )
    cfg = _load_train_cfg(res)
    base_seed = res.get_int("search.base_seed", 0)
    task = _load_task(res, root)
    _check_task_dims(task, res.get_int("arch.d_x", required=True), res.get_int("arch.d_out", required=True))
    res.reject_unknown()
    _write_manifest(args.out, args.config, res.resolved)

    rows = run_search(
        candidates,
        task,
        cfg,
        results_path,
        repeats=space.repeats,
        base_seed=base_seed,
        n_workers=args.workers,
    )
    n_ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"search complete: {len(candidates)} configs, {len(rows)} runs, {n_ok} ok")
    return EXIT_OK


def cmd_pareto(args) -> int:
    rows = read_results(args.results)
    if not rows:
        raise DataError(f"no result rows found in {args.results}")
    aggs = aggregate(rows, metric=args.metric)
    if not aggs:
        raise DataError(f"no successful runs in {args.results}")
    front = write_frontier(args.out, aggs)
    print(f"frontier: {len(front)} of {len(aggs)} configs survive")
    return EXIT_OK


def cmd_eval(args) -> int:
    kv = load_config_file(args.config)
    res = Resolver(kv)
    root = _data_root(res, args, args.config)
    task = _load_task(res, root)
    res.reject_unknown(known_prefixes=("arch.", "train.", "search."))
    report = evaluate(args.checkpoint, args.split, task)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["split", "n_samples", "mse", "psnr_db", "ssim", "accuracy"])
    writer.writerow(
        [
            args.split,
            report.n_samples,
            repr(report.mse),
            repr(report.psnr_db),
            repr(report.ssim),
            "" if report.accuracy is None else repr(report.accuracy),
        ]
    )
    return EXIT_OK


def cmd_gen_data(args) -> int:
    kv = load_config_file(args.config)
    res = Resolver(kv)
    os.makedirs(args.out, exist_ok=True)
    kind = res.get_str("gen.kind", required=True)
    if kind == "synthetic-mnist":
        paths = synth.write_synthetic_corpus(
            args.out,
            seed=res.get_int("gen.seed", 0),
            n_train=res.get_int("gen.n_train", 60000),
            n_test=res.get_int("gen.n_test", 10000),
        )
        res.reject_unknown()
        _write_manifest(args.out, args.config, res.resolved)
        print("\n".join(paths[k] for k in sorted(paths)))
        return EXIT_OK
    if kind in ("denoise", "superres"):
        root = _data_root(res, args, args.config)
        res.set_default("task.kind", kind)  # gen kind doubles as task kind
        task = _load_task(res, root)
        res.reject_unknown(known_prefixes=("arch.", "train.", "search."))
        _write_manifest(args.out, args.config, res.resolved)
        for name in ("train", "val", "test"):
            batch = getattr(task, name)
            for field, shape in (("images", task.in_shape), ("targets", task.out_shape)):
                arr = getattr(batch, field)
                h, w, c = shape
                quantized = np.round(arr * 255.0).astype(np.uint8).reshape(-1, h, w, c)
                write_raw_tensor(os.path.join(args.out, f"{name}_{field}.hgrt"), quantized)
        print(f"materialized {kind} tensors into {args.out}")
        return EXIT_OK
    raise ConfigError(f"unknown gen.kind {kind!r}; known: synthetic-mnist, denoise, superres")


def cmd_gradcheck(args) -> int:
    from .gradcheck import default_suite  # heavy import, keep out of CLI startup

    results = default_suite(seed=args.seed, shapes_per_layer=args.shapes)
    worst = 0.0
    failures = 0
    for r in results:
        status = "ok" if r.ok else "FAIL"
        print(f"{status:4s} {r.name:40s} max_rel_err={r.max_rel_err:.3e} tol={r.tolerance:.0e}")
        worst = max(worst, r.max_rel_err / r.tolerance)
        failures += 0 if r.ok else 1
    print(f"{len(results) - failures}/{len(results)} checks passed (worst err/tol {worst:.3f})")
    return EXIT_OK if failures == 0 else 1


# ---------------------------------------------------------------------------
# parser / dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hourglass",
        description="Train, search, and evaluate residual MLP stacks on image-restoration tasks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one architecture from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--data-root", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search", help="grid search with repeats and a crash-resumable store")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--data-root", default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("pareto", help="extract the non-dominated frontier from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", default="psnr_db", choices=["psnr_db", "ssim", "accuracy"])
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a named split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--split", required=True, choices=["train", "val", "test"])
    p.add_argument("--data-root", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-data", help="materialize datasets (synthetic corpus or task tensors)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data-root", default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("gradcheck", help="run the finite-difference verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shapes", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, DomainError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HourglassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
