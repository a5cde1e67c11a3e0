"""AdamW with decoupled weight decay and the linear learning-rate schedule."""

from __future__ import annotations

import logging

import numpy as np

from .errors import DomainError, NumericsError
from .layers import Param

log = logging.getLogger(__name__)


class AdamW:
    """Bias-corrected Adam moments plus decay applied directly to weights.

    Moments are kept in float64 (exact scalar traces, negligible cost at this
    scale); parameters keep their own dtype. One state per network; `step`
    reads the accumulated `.grad` of every param it was built with.
    """

    def __init__(
        self,
        params: list[Param],
        *,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise DomainError(f"betas must be in [0, 1), got ({beta1}, {beta2})")
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros(p.value.shape, dtype=np.float64) for p in self.params]
        self._v = [np.zeros(p.value.shape, dtype=np.float64) for p in self.params]

    def step(self, lr_now: float) -> None:
        """One update over every parameter; grads must already be populated."""
        if lr_now <= 0:
            raise DomainError(f"lr must be positive, got {lr_now}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad.astype(np.float64, copy=False)
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"non-finite gradient in parameter {p.name!r} at step {t}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            new_value = p.value.astype(np.float64, copy=False)
            if self.weight_decay != 0.0:
                new_value = new_value * (1.0 - lr_now * self.weight_decay)
            new_value = new_value - lr_now * update
            p.value[...] = new_value.astype(p.value.dtype)

    def zero_grads(self) -> None:
        for p in self.params:
            p.zero_grad()


def linear_lr(base_lr: float, step: int, total_steps: int) -> float:
    """base_lr * (1 - step/total_steps), no warm-up; decays to 0 at the end."""
    if total_steps < 1:
        raise DomainError(f"total_steps must be >= 1, got {total_steps}")
    if step < 0:
        raise DomainError(f"step must be >= 0, got {step}")
    if step > total_steps:
        log.warning("linear_lr: step %d beyond total %d, clamping lr to 0", step, total_steps)
        return 0.0
    return base_lr * (1.0 - step / total_steps)
