"""Grid search with repeated seeds, aggregation, and Pareto extraction.

Runs persist incrementally to an append-only CSV keyed by (config_hash, seed)
so an interrupted search resumes with exactly the missing jobs; after a
completed pass the file is rewritten in canonical enumeration order so equal
configs always produce byte-identical stores.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

from . import rng
from .data import TaskData
from .errors import DomainError
from .model import ArchConfig, arch_to_kv, param_count
from .trainer import RunResult, TrainConfig, train

log = logging.getLogger(__name__)

RESULTS_FIELDS = [
    "config_hash",
    "variant",
    "d_x",
    "d_z",
    "d_h",
    "L",
    "lr",
    "seed",
    "params_trainable",
    "params_total",
    "mse",
    "psnr_db",
    "ssim",
    "accuracy",
    "status",
]

FRONTIER_FIELDS = [
    "params_M",
    "mean",
    "std",
    "config_hash",
    "variant",
    "d_x",
    "d_z",
    "d_h",
    "L",
    "lr",
    "n_runs",
]


def fmt(value) -> str:
    """Shortest round-trip float formatting (byte-stable across runs)."""
    return repr(float(value))


@dataclass(frozen=True)
class SearchSpace:
    variant: str
    d_z_values: tuple[int, ...]
    d_h_values: tuple[int, ...]
    L_values: tuple[int, ...]
    lr_values: tuple[float, ...]
    repeats: int = 5


@dataclass(frozen=True)
class Candidate:
    arch: ArchConfig
    lr: float
    config_hash: str


def candidate_hash(arch: ArchConfig, lr: float) -> str:
    kv = arch_to_kv(arch)
    text = "".join(f"{k}={kv[k]};" for k in sorted(kv)) + f"lr={fmt(lr)}"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _admissible(variant: str, d_x: int, d_z: int, d_h: int, L: int) -> bool:
    if variant == "hourglass":
        return d_z > d_x and (L == 0 or d_h < d_z)
    return L == 0 or d_h > d_z


def enumerate_configs(
    space: SearchSpace,
    d_x: int,
    d_out: int,
    *,
    budget_cap: int | None = None,
    head: str = "image",
    projection: str = "trainable",
    distribution: str = "gaussian",
    activation: str = "gelu",
    arch_seed: int = 0,
) -> list[Candidate]:
    """Constraint-filtered Cartesian grid, ordered by (d_z, d_h, L, lr)."""
    if not (space.d_z_values and space.d_h_values and space.L_values and space.lr_values):
        raise DomainError("search space has an empty axis")
    out: list[Candidate] = []
    for d_z, d_h, L, lr in product(
        sorted(space.d_z_values), sorted(space.d_h_values), sorted(space.L_values), sorted(space.lr_values)
    ):
        if not _admissible(space.variant, d_x, d_z, d_h, L):
            continue
        arch = ArchConfig(
            variant=space.variant,
            d_x=d_x,
            d_z=d_z,
            d_h=d_h,
            L=L,
            d_out=d_out,
            head=head,
            projection=projection,
            distribution=distribution,
            activation=activation,
            seed=arch_seed,
        )
        if budget_cap is not None and param_count(arch).trainable > budget_cap:
            continue
        out.append(Candidate(arch, lr, candidate_hash(arch, lr)))
    if not out:
        log.warning("search space is empty after constraint filtering")
    return out


# ---------------------------------------------------------------------------
# results store


def result_row(cand: Candidate, result: RunResult) -> dict:
    counts = param_count(cand.arch)
    row = {
        "config_hash": cand.config_hash,
        "variant": cand.arch.variant,
        "d_x": str(cand.arch.d_x),
        "d_z": str(cand.arch.d_z),
        "d_h": str(cand.arch.d_h),
        "L": str(cand.arch.L),
        "lr": fmt(cand.lr),
        "seed": str(result.seed),
        "params_trainable": str(counts.trainable),
        "params_total": str(counts.total),
        "status": result.status,
    }
    if result.final is None:
        row.update({"mse": "", "psnr_db": "", "ssim": "", "accuracy": ""})
    else:
        rep = result.final.as_row()
        row.update(
            {
                "mse": fmt(rep["mse"]),
                "psnr_db": fmt(rep["psnr_db"]),
                "ssim": fmt(rep["ssim"]),
                "accuracy": "" if rep["accuracy"] == "" else fmt(rep["accuracy"]),
            }
        )
    return row


def write_results(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULTS_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def read_results(path) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def completed_pairs(rows) -> set[tuple[str, str]]:
    return {(row["config_hash"], row["seed"]) for row in rows}


def repeat_seed(base_seed: int, repeat: int) -> int:
    return rng.derive_key(base_seed, "repeat", repeat)


def run_search(
    candidates: list[Candidate],
    task: TaskData,
    base_cfg: TrainConfig,
    results_path,
    *,
    repeats: int,
    base_seed: int = 0,
    n_workers: int = 1,
) -> list[dict]:
    """Train every (candidate, repeat) pair not already present in the store.

    Returns all rows (old and new) in canonical order and rewrites the store
    to match. Failed runs are recorded and skipped by aggregation.
    """
    existing = read_results(results_path)
    done = completed_pairs(existing)
    jobs = []
    for idx, cand in enumerate(candidates):
        for r in range(repeats):
            seed = repeat_seed(base_seed, r)
            if (cand.config_hash, str(seed)) not in done:
                jobs.append((idx, r, cand, seed))

    lock = threading.Lock()
    new_rows: dict[tuple[int, int], dict] = {}

    def execute(job) -> None:
        idx, r, cand, seed = job
        cfg = TrainConfig(
            epochs=base_cfg.epochs,
            batch_size=base_cfg.batch_size,
            base_lr=cand.lr,
            beta1=base_cfg.beta1,
            beta2=base_cfg.beta2,
            eps=base_cfg.eps,
            weight_decay=base_cfg.weight_decay,
            eval_every=base_cfg.eval_every,
            seed=seed,
        )
        try:
            result = train(cand.arch, task, cfg)
        except Exception:
            log.exception("run failed: %s seed=%d", cand.config_hash, seed)
            result = RunResult(cand.arch, cfg, seed, param_count(cand.arch).trainable, "failed", None, ())
        row = result_row(cand, result)
        with lock:
            new_rows[(idx, r)] = row
            fresh = not os.path.exists(results_path)
            with open(results_path, "a", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=RESULTS_FIELDS, lineterminator="\n")
                if fresh:
                    writer.writeheader()
                writer.writerow(row)

    if n_workers <= 1:
        for job in jobs:
            execute(job)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(execute, jobs))

    # canonical order: enumeration index, then repeat; unknown rows last
    order = {cand.config_hash: idx for idx, cand in enumerate(candidates)}
    seed_order = {str(repeat_seed(base_seed, r)): r for r in range(repeats)}
    all_rows = existing + [new_rows[key] for key in sorted(new_rows)]
    all_rows.sort(
        key=lambda row: (
            order.get(row["config_hash"], len(order)),
            seed_order.get(row["seed"], math.inf),
            row["seed"],
        )
    )
    write_results(results_path, all_rows)
    return all_rows


# ---------------------------------------------------------------------------
# aggregation and the frontier


@dataclass(frozen=True)
class Aggregate:
    config_hash: str
    variant: str
    d_x: int
    d_z: int
    d_h: int
    L: int
    lr: float
    params_trainable: int
    n_runs: int
    mean: float
    std: float


def aggregate(rows, metric: str = "psnr_db") -> list[Aggregate]:
    """Per-config mean and sample std (n-1); single runs report std 0, n=1."""
    grouped: dict[str, list[dict]] = {}
    order: list[str] = []
    for row in rows:
        if row["config_hash"] not in grouped:
            order.append(row["config_hash"])
        grouped.setdefault(row["config_hash"], []).append(row)
    out = []
    for config_hash in order:
        group = grouped[config_hash]
        ok = [r for r in group if r["status"] == "ok" and r[metric] != ""]
        if not ok:
            log.warning("config %s has no successful runs; excluded", config_hash)
            continue
        values = [float(r[metric]) for r in ok]
        n = len(values)
        mean = sum(values) / n
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
        first = ok[0]
        out.append(
            Aggregate(
                config_hash=config_hash,
                variant=first["variant"],
                d_x=int(first["d_x"]),
                d_z=int(first["d_z"]),
                d_h=int(first["d_h"]),
                L=int(first["L"]),
                lr=float(first["lr"]),
                params_trainable=int(first["params_trainable"]),
                n_runs=n,
                mean=mean,
                std=std,
            )
        )
    return out


@dataclass(frozen=True)
class ParetoPoint:
    params_trainable: int
    mean_metric: float
    std_metric: float
    config_id: str
    n_runs: int = 1


def pareto_front(points) -> list[ParetoPoint]:
    """Non-dominated subset in (params down, metric up), sorted by params.

    A point survives iff its mean strictly exceeds that of every other
    survivor with fewer-or-equal params; exact ties on both axes keep the
    lexicographically smallest config_id.
    """
    points = list(points)
    if not points:
        raise DomainError("pareto_front needs at least one point")
    # exact-tie dedup first
    best_by_key: dict[tuple[int, float], ParetoPoint] = {}
    for p in points:
        key = (p.params_trainable, p.mean_metric)
        cur = best_by_key.get(key)
        if cur is None or p.config_id < cur.config_id:
            best_by_key[key] = p
    ordered = sorted(
        best_by_key.values(), key=lambda p: (p.params_trainable, -p.mean_metric, p.config_id)
    )
    front: list[ParetoPoint] = []
    best = -math.inf
    for p in ordered:
        if p.mean_metric > best:
            front.append(p)
            best = p.mean_metric
    return front


def frontier_from_aggregates(aggs: list[Aggregate]) -> list[ParetoPoint]:
    return pareto_front(
        ParetoPoint(a.params_trainable, a.mean, a.std, a.config_hash, a.n_runs) for a in aggs
    )


def write_frontier(path, aggs: list[Aggregate]) -> list[ParetoPoint]:
    """Aggregate -> frontier -> CSV directly plottable as params-vs-metric."""
    front = frontier_from_aggregates(aggs)
    by_id = {a.config_hash: a for a in aggs}
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FRONTIER_FIELDS, lineterminator="\n")
        writer.writeheader()
        for p in front:
            agg = by_id[p.config_id]
            writer.writerow(
                {
                    "params_M": fmt(p.params_trainable / 1e6),
                    "mean": fmt(p.mean_metric),
                    "std": fmt(p.std_metric),
                    "config_hash": p.config_id,
                    "variant": agg.variant,
                    "d_x": str(agg.d_x),
                    "d_z": str(agg.d_z),
                    "d_h": str(agg.d_h),
                    "L": str(agg.L),
                    "lr": fmt(agg.lr),
                    "n_runs": str(p.n_runs),
                }
            )
    return front
