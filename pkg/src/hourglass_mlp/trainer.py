"""Single-run training loop: model + AdamW + linear schedule + metrics.

A run is fully determined by (arch, task data, train config): weight init,
batch order, and evaluation cadence all derive from the config's seed. The
final report always comes from the parameters with the lowest validation
loss, never from the last step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics, rng
from .data import ImageBatch, TaskData
from .errors import ConfigError
from .model import ArchConfig, Network, load, param_count, save
from .optim import AdamW, linear_lr


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 128
    base_lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    eval_every: int | None = None  # steps; None = once per epoch
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")


@dataclass(frozen=True)
class EvalPoint:
    step: int
    val_loss: float
    val_psnr: float


@dataclass(frozen=True)
class RunResult:
    arch: ArchConfig
    train: TrainConfig
    seed: int
    params_trainable: int
    status: str  # "ok" | "failed"
    final: metrics.MetricReport | None
    history: tuple[EvalPoint, ...]


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Raw (unclamped) mean squared error and its gradient w.r.t. pred."""
    diff = pred - target
    loss = float((diff.astype(np.float64) ** 2).mean())
    return loss, (2.0 / diff.size) * diff


def predict(net: Network, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
    out = np.empty((images.shape[0], net.config.d_out), dtype=net.dtype)
    for start in range(0, images.shape[0], batch_size):
        end = min(start + batch_size, images.shape[0])
        out[start:end] = net.forward(images[start:end])
    return out


def _val_scores(net: Network, val: ImageBatch) -> tuple[float, float]:
    pred = predict(net, val.images)
    diff = pred.astype(np.float64) - val.targets.astype(np.float64)
    raw_mse = float((diff * diff).mean())
    return raw_mse, metrics.psnr(pred, val.targets)


def report_on(net: Network, batch: ImageBatch, task: TaskData) -> metrics.MetricReport:
    pred = predict(net, batch.images)
    return metrics.evaluate_images(
        pred, batch.targets, task.out_shape, prototypes=task.prototypes, labels=batch.labels
    )


def train(
    arch: ArchConfig,
    task: TaskData,
    cfg: TrainConfig,
    checkpoint_path=None,
) -> RunResult:
    net = Network(arch, init_seed=rng.derive_key(cfg.seed, "init"))
    opt = AdamW(
        net.parameters(),
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )
    n = len(task.train)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    eval_every = cfg.eval_every if cfg.eval_every is not None else steps_per_epoch

    history: list[EvalPoint] = []
    best_loss = math.inf
    best_values: list[np.ndarray] | None = None
    counted = param_count(arch).trainable
    step = 0
    failed = False

    for epoch in range(cfg.epochs):
        order = rng.random_permutation(rng.derive_key(cfg.seed, "data", epoch), n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            lr_now = linear_lr(cfg.base_lr, step, total_steps)
            pred = net.forward(task.train.images[idx])
            loss, grad = mse_loss(pred, task.train.targets[idx])
            if not math.isfinite(loss):
                failed = True
                break
            net.zero_grads()
            net.backward(grad.astype(net.dtype))
            opt.step(lr_now)
            step += 1
            if step % eval_every == 0 or step == total_steps:
                val_loss, val_psnr = _val_scores(net, task.val)
                history.append(EvalPoint(step, val_loss, val_psnr))
                if val_loss < best_loss:
                    best_loss = val_loss
                    best_values = [p.value.copy() for p in net.parameters()]
        if failed:
            break

    if failed:
        return RunResult(arch, cfg, cfg.seed, counted, "failed", None, tuple(history))

    if best_values is not None:
        for p, v in zip(net.parameters(), best_values):
            p.value[...] = v
    final = report_on(net, task.test, task)
    if checkpoint_path is not None:
        save(net, checkpoint_path)
    return RunResult(arch, cfg, cfg.seed, counted, "ok", final, tuple(history))


SPLITS = ("train", "val", "test")


def evaluate(checkpoint_path, split: str, task: TaskData) -> metrics.MetricReport:
    """Deterministic metrics of a saved checkpoint on a named split."""
    if split not in SPLITS:
        raise ConfigError(f"unknown split {split!r}; known: {SPLITS}")
    net = load(checkpoint_path)
    return report_on(net, getattr(task, split), task)
