"""Layer primitives with hand-derived backward passes.

Forward caches whatever the backward pass needs; gradients ACCUMULATE into
`Param.grad` (call `zero_grads` between optimizer steps). Layers are
dtype-generic: float32 for training, float64 for gradient checking.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng, tensor
from .errors import ConfigError, ShapeError, StateError


class Param:
    """A trainable array plus an accumulated gradient of the same shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def astype(self, dtype) -> "Param":
        return Param(self.name, self.value.astype(dtype))


def glorot_uniform(key: int, out_dim: int, in_dim: int, dtype=tensor.DTYPE) -> np.ndarray:
    """Centered uniform init with bound sqrt(6 / (fan_in + fan_out))."""
    bound = math.sqrt(6.0 / (in_dim + out_dim))
    u = rng.random_uniform(key, np.arange(out_dim * in_dim, dtype=np.uint64))
    return ((2.0 * u - 1.0) * bound).reshape(out_dim, in_dim).astype(dtype)


# ---------------------------------------------------------------------------
# activations


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU, tanh approximation."""
    c = x.dtype.type(math.sqrt(2.0 / math.pi))
    k = x.dtype.type(0.044715)
    half = x.dtype.type(0.5)
    return half * x * (1.0 + np.tanh(c * (x + k * x * x * x)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    c = x.dtype.type(math.sqrt(2.0 / math.pi))
    k = x.dtype.type(0.044715)
    half = x.dtype.type(0.5)
    inner = c * (x + k * x * x * x)
    t = np.tanh(inner)
    d_inner = c * (1.0 + 3.0 * k * x * x)
    return half * (1.0 + t) + half * x * (1.0 - t * t) * d_inner


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, x.dtype.type(0))


def relu_grad(x: np.ndarray) -> np.ndarray:
    return (x > 0).astype(x.dtype)


_ACTIVATIONS = {"gelu": (gelu, gelu_grad), "relu": (relu, relu_grad)}


def activation(tag: str, x: np.ndarray) -> np.ndarray:
    try:
        fn, _ = _ACTIVATIONS[tag]
    except KeyError:
        raise ConfigError(f"unknown activation tag {tag!r}; known: {sorted(_ACTIVATIONS)}") from None
    return fn(x)


def activation_backward(tag: str, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    try:
        _, dfn = _ACTIVATIONS[tag]
    except KeyError:
        raise ConfigError(f"unknown activation tag {tag!r}; known: {sorted(_ACTIVATIONS)}") from None
    return grad_out * dfn(x)


# ---------------------------------------------------------------------------
# layers


class LinearLayer:
    """y = x @ W.T (+ b) with W of shape [out_dim, in_dim]."""

    def __init__(
        self,
        out_dim: int,
        in_dim: int,
        *,
        bias: bool = True,
        init_key: int | None = None,
        dtype=tensor.DTYPE,
        name: str = "linear",
    ):
        if out_dim < 1 or in_dim < 1:
            raise ConfigError(f"linear dims must be >= 1, got {out_dim}x{in_dim}")
        self.name = name
        if init_key is None:
            w = np.zeros((out_dim, in_dim), dtype=dtype)
        else:
            w = glorot_uniform(init_key, out_dim, in_dim, dtype=dtype)
        self.weight = Param(f"{name}.weight", w)
        self.bias = Param(f"{name}.bias", np.zeros(out_dim, dtype=dtype)) if bias else None
        self._x: np.ndarray | None = None

    @property
    def out_dim(self) -> int:
        return self.weight.value.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.value.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"{self.name}: input has {x.shape[1]} cols, expected {self.in_dim}")
        self._x = x
        y = tensor.matmul(x, self.weight.value.T)
        if self.bias is not None:
            y = tensor.add_row_vector(y, self.bias.value)
        return y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise StateError(f"{self.name}: backward called before forward")
        if grad_out.shape != (self._x.shape[0], self.out_dim):
            raise ShapeError(
                f"{self.name}: grad shape {grad_out.shape} does not match output "
                f"({self._x.shape[0]}, {self.out_dim})"
            )
        self.weight.grad += tensor.matmul(grad_out.T, self._x)
        if self.bias is not None:
            self.bias.grad += grad_out.sum(axis=0)
        return tensor.matmul(grad_out, self.weight.value)

    def params(self) -> list[Param]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class NormLayer:
    """Per-row standardization with learnable gain/shift.

    y = gain * (x - mean_row) / sqrt(var_row + eps) + shift, biased variance.
    """

    def __init__(self, dim: int, *, eps: float = 1e-5, dtype=tensor.DTYPE, name: str = "norm"):
        if dim < 1:
            raise ConfigError(f"norm dim must be >= 1, got {dim}")
        if eps <= 0:
            raise ConfigError(f"norm eps must be positive, got {eps}")
        self.name = name
        self.eps = eps
        self.gain = Param(f"{name}.gain", np.ones(dim, dtype=dtype))
        self.shift = Param(f"{name}.shift", np.zeros(dim, dtype=dtype))
        self._xhat: np.ndarray | None = None
        self._inv_std: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.gain.value.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.dim:
            raise ShapeError(f"{self.name}: input has {x.shape[1]} cols, expected {self.dim}")
        mu = x.mean(axis=1, keepdims=True)
        var = x.var(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + x.dtype.type(self.eps))
        xhat = (x - mu) * inv_std
        self._xhat = xhat
        self._inv_std = inv_std
        return xhat * self.gain.value + self.shift.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._xhat is None:
            raise StateError(f"{self.name}: backward called before forward")
        xhat, inv_std = self._xhat, self._inv_std
        if grad_out.shape != xhat.shape:
            raise ShapeError(f"{self.name}: grad shape {grad_out.shape} vs {xhat.shape}")
        self.gain.grad += (grad_out * xhat).sum(axis=0)
        self.shift.grad += grad_out.sum(axis=0)
        d = xhat.shape[1]
        dxhat = grad_out * self.gain.value
        mean_dxhat = dxhat.mean(axis=1, keepdims=True)
        mean_dxhat_xhat = (dxhat * xhat).mean(axis=1, keepdims=True)
        return inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)

    def params(self) -> list[Param]:
        return [self.gain, self.shift]


class ResidualBlock:
    """z + lin2(act(lin1(norm(z)))): the skip stays at width d_z.

    hourglass blocks contract (d_h < d_z); conventional blocks expand
    (d_h > d_z). Residual-branch weights total 2 * d_z * d_h either way.
    """

    def __init__(
        self,
        shape_tag: str,
        d_z: int,
        d_h: int,
        *,
        activation: str = "gelu",
        eps: float = 1e-5,
        init_key: int | None = 0,
        dtype=tensor.DTYPE,
        name: str = "block",
    ):
        if shape_tag == "hourglass":
            if not d_h < d_z:
                raise ConfigError(f"{name}: hourglass requires d_h < d_z, got d_h={d_h}, d_z={d_z}")
        elif shape_tag == "conventional":
            if not d_h > d_z:
                raise ConfigError(f"{name}: conventional requires d_h > d_z, got d_h={d_h}, d_z={d_z}")
        else:
            raise ConfigError(f"{name}: unknown shape tag {shape_tag!r}")
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"{name}: unknown activation tag {activation!r}")
        self.name = name
        self.shape_tag = shape_tag
        self.activation = activation
        self.norm = NormLayer(d_z, eps=eps, dtype=dtype, name=f"{name}.norm")
        key1 = rng.derive_key(init_key, "lin1") if init_key is not None else None
        key2 = rng.derive_key(init_key, "lin2") if init_key is not None else None
        self.lin1 = LinearLayer(d_h, d_z, init_key=key1, dtype=dtype, name=f"{name}.lin1")
        self.lin2 = LinearLayer(d_z, d_h, init_key=key2, dtype=dtype, name=f"{name}.lin2")
        self._pre_act: np.ndarray | None = None

    @property
    def d_z(self) -> int:
        return self.lin1.in_dim

    @property
    def d_h(self) -> int:
        return self.lin1.out_dim

    def forward(self, z: np.ndarray) -> np.ndarray:
        if z.shape[1] != self.d_z:
            raise ShapeError(f"{self.name}: input has {z.shape[1]} cols, expected {self.d_z}")
        a = self.lin1.forward(self.norm.forward(z))
        self._pre_act = a
        r = self.lin2.forward(activation(self.activation, a))
        return tensor.add(z, r)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._pre_act is None:
            raise StateError(f"{self.name}: backward called before forward")
        gh = self.lin2.backward(grad_out)
        ga = activation_backward(self.activation, self._pre_act, gh)
        gz_branch = self.norm.backward(self.lin1.backward(ga))
        # skip path passes grad_out through unchanged
        return tensor.add(grad_out, gz_branch)

    def params(self) -> list[Param]:
        return self.norm.params() + self.lin1.params() + self.lin2.params()

    def residual_weight_count(self) -> int:
        return 2 * self.d_z * self.d_h


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()
