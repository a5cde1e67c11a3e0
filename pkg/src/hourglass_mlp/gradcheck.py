"""Central finite-difference verification of every hand-derived backward pass.

The oracle always runs on the float64 path (h=1e-5); analytic gradients from
either dtype are compared against it with the relative-error convention
|a - b| / max(|a|, |b|, 1e-8).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .layers import LinearLayer, NormLayer, Param, ResidualBlock, activation, activation_backward
from .model import ArchConfig, Network

FD_STEP = 1e-5
REL_FLOOR = 1e-8

LAYER_TOL = 1e-4
NETWORK_TOL_64 = 1e-5
NETWORK_TOL_32 = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= self.tolerance


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_FLOOR)
    return float((np.abs(a - b) / denom).max()) if a.size else 0.0


def finite_difference(loss_fn: Callable[[], float], params: list[Param], h: float = FD_STEP):
    """Central differences of loss_fn w.r.t. every entry of every param."""
    grads = []
    for p in params:
        flat = p.value.reshape(-1)
        g = np.zeros_like(flat, dtype=np.float64)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            g[i] = (up - down) / (2.0 * h)
        grads.append(g.reshape(p.value.shape))
    return grads


def _probe(key: int, shape: tuple[int, ...]) -> np.ndarray:
    """Fixed random linear functional so scalar loss = sum(out * probe)."""
    return rng.random_normal(key, np.arange(int(np.prod(shape)), dtype=np.uint64)).reshape(shape)


def _rand(key: int, shape: tuple[int, ...]) -> np.ndarray:
    return rng.random_normal(key, np.arange(int(np.prod(shape)), dtype=np.uint64)).reshape(shape)


def check_linear(seed: int, batch: int, out_dim: int, in_dim: int) -> CheckResult:
    layer = LinearLayer(out_dim, in_dim, init_key=rng.derive_key(seed, "w"), dtype=np.float64)
    x = _rand(rng.derive_key(seed, "x"), (batch, in_dim))
    probe = _probe(rng.derive_key(seed, "p"), (batch, out_dim))

    def loss() -> float:
        return float((layer.forward(x) * probe).sum())

    loss()
    for p in layer.params():
        p.zero_grad()
    layer.backward(probe)
    analytic = [p.grad.copy() for p in layer.params()]
    numeric = finite_difference(loss, layer.params())
    err = max(relative_error(a, n) for a, n in zip(analytic, numeric))

    # input gradient too
    layer_x = Param("x", x.copy())

    def loss_x() -> float:
        return float((layer.forward(layer_x.value) * probe).sum())

    loss_x()
    gx = layer.backward(probe)
    (gx_num,) = finite_difference(loss_x, [layer_x])
    err = max(err, relative_error(gx, gx_num))
    return CheckResult(f"linear[{batch}x{in_dim}->{out_dim}]", err, LAYER_TOL)


def check_norm(seed: int, batch: int, dim: int) -> CheckResult:
    layer = NormLayer(dim, dtype=np.float64)
    layer.gain.value[...] = 1.0 + 0.1 * _rand(rng.derive_key(seed, "g"), (dim,))
    layer.shift.value[...] = 0.1 * _rand(rng.derive_key(seed, "s"), (dim,))
    x = Param("x", _rand(rng.derive_key(seed, "x"), (batch, dim)))
    probe = _probe(rng.derive_key(seed, "p"), (batch, dim))

    def loss() -> float:
        return float((layer.forward(x.value) * probe).sum())

    loss()
    for p in layer.params():
        p.zero_grad()
    gx = layer.backward(probe)
    analytic = [p.grad.copy() for p in layer.params()] + [gx]
    numeric = finite_difference(loss, layer.params() + [x])
    err = max(relative_error(a, n) for a, n in zip(analytic, numeric))
    return CheckResult(f"norm[{batch}x{dim}]", err, LAYER_TOL)


def check_activation(seed: int, tag: str, batch: int, dim: int) -> CheckResult:
    x = Param("x", _rand(rng.derive_key(seed, "x"), (batch, dim)))
    if tag == "relu":
        # keep probes away from the kink where the derivative jumps
        x.value[np.abs(x.value) < 1e-3] += 0.01
    probe = _probe(rng.derive_key(seed, "p"), (batch, dim))

    def loss() -> float:
        return float((activation(tag, x.value) * probe).sum())

    analytic = activation_backward(tag, x.value, probe)
    (numeric,) = finite_difference(loss, [x])
    return CheckResult(f"activation[{tag},{batch}x{dim}]", relative_error(analytic, numeric), LAYER_TOL)


def check_block(seed: int, shape_tag: str, batch: int, d_z: int, d_h: int) -> CheckResult:
    block = ResidualBlock(
        shape_tag, d_z, d_h, init_key=rng.derive_key(seed, "b"), dtype=np.float64
    )
    x = Param("x", _rand(rng.derive_key(seed, "x"), (batch, d_z)))
    probe = _probe(rng.derive_key(seed, "p"), (batch, d_z))

    def loss() -> float:
        return float((block.forward(x.value) * probe).sum())

    loss()
    for p in block.params():
        p.zero_grad()
    gx = block.backward(probe)
    analytic = [p.grad.copy() for p in block.params()] + [gx]
    numeric = finite_difference(loss, block.params() + [x])
    err = max(relative_error(a, n) for a, n in zip(analytic, numeric))
    return CheckResult(f"block[{shape_tag},{batch}x{d_z},h={d_h}]", err, LAYER_TOL)


def _network_loss(net: Network, x: np.ndarray, target: np.ndarray) -> float:
    pred = net.forward(x)
    diff = (pred - target).astype(np.float64)
    return float((diff * diff).mean())


def check_network(seed: int, config: ArchConfig, batch: int = 2, dtype=np.float64) -> CheckResult:
    """Full-network MSE gradient check against the float64 FD oracle.

    With dtype=float32 the analytic pass runs in production precision while
    the oracle differentiates an exact float64 twin at the same point.
    """
    subject = Network(config, init_seed=rng.derive_key(seed, "init"), dtype=dtype)
    net64 = subject if dtype == np.float64 else subject.astype(np.float64)
    x = _rand(rng.derive_key(seed, "x"), (batch, config.d_x))
    target = _rand(rng.derive_key(seed, "t"), (batch, config.d_out))

    def loss() -> float:
        return _network_loss(net64, x, target)

    numeric = finite_difference(loss, net64.parameters())
    pred = subject.forward(x.astype(dtype))
    grad = (2.0 / pred.size) * (pred - target.astype(dtype))
    subject.zero_grads()
    subject.backward(grad.astype(dtype))
    err = max(
        relative_error(p.grad, n) for p, n in zip(subject.parameters(), numeric)
    )
    tol = NETWORK_TOL_64 if dtype == np.float64 else NETWORK_TOL_32
    bits = "64" if dtype == np.float64 else "32"
    return CheckResult(f"network[{config.variant},f{bits}]", err, tol)


def default_suite(seed: int = 0, shapes_per_layer: int = 20) -> list[CheckResult]:
    """The full verification suite run by the `gradcheck` CLI subcommand."""
    results: list[CheckResult] = []
    for i in range(shapes_per_layer):
        k = rng.derive_key(seed, "case", i)
        batch = 1 + rng.random_index(rng.derive_key(k, "b"), 4)
        d_in = 2 + rng.random_index(rng.derive_key(k, "i"), 6)
        d_out = 2 + rng.random_index(rng.derive_key(k, "o"), 6)
        results.append(check_linear(rng.derive_key(k, "lin"), batch, d_out, d_in))
        results.append(check_norm(rng.derive_key(k, "nrm"), batch, 2 + d_in))
        results.append(check_activation(rng.derive_key(k, "gl"), "gelu", batch, d_in))
        results.append(check_activation(rng.derive_key(k, "rl"), "relu", batch, d_in))
        d_z = 3 + d_in
        results.append(check_block(rng.derive_key(k, "hb"), "hourglass", batch, d_z, max(1, d_z - 2)))
        results.append(check_block(rng.derive_key(k, "cb"), "conventional", batch, d_z, d_z + 2))
    hour = ArchConfig(
        variant="hourglass", d_x=4, d_z=8, d_h=2, L=2, d_out=4, projection="trainable", seed=seed
    )
    conv = ArchConfig(
        variant="conventional", d_x=6, d_z=6, d_h=9, L=2, d_out=5, projection="trainable", seed=seed
    )
    fixed = ArchConfig(
        variant="hourglass", d_x=4, d_z=8, d_h=2, L=2, d_out=4, projection="fixed", seed=seed
    )
    for cfg in (hour, conv, fixed):
        results.append(check_network(rng.derive_key(seed, cfg.variant, cfg.projection), cfg))
        results.append(
            check_network(rng.derive_key(seed, cfg.variant, cfg.projection), cfg, dtype=np.float32)
        )
    return results
