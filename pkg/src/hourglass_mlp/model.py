"""Network assembly: input projection -> L residual blocks -> output head.

Owns parameter accounting (weights only, matching the stacked-MLP formula
d_x*d_z + 2L*d_z*d_h plus the output head d_z*d_out) and the checkpoint
format. Fixed input projections are stored as a 5-field spec, never as a
matrix.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import randproj, rng, tensor
from .errors import (
    CheckpointChecksumError,
    CheckpointFormatError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigError,
    ShapeError,
    StateError,
)
from .layers import LinearLayer, Param, ResidualBlock

VARIANTS = ("conventional", "hourglass")
HEADS = ("image", "classify")
PROJECTIONS = ("trainable", "fixed")

CHECKPOINT_MAGIC = b"HGMLCKPT"
CHECKPOINT_VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


@dataclass(frozen=True)
class ArchConfig:
    """Everything that determines a network's shape and parameter count.

    For `head="classify"` the output dimension d_out is the class count.
    """

    variant: str
    d_x: int
    d_z: int
    d_h: int
    L: int
    d_out: int
    head: str = "image"
    projection: str = "trainable"
    distribution: str = "gaussian"
    activation: str = "gelu"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; known: {VARIANTS}")
        if self.head not in HEADS:
            raise ConfigError(f"unknown head {self.head!r}; known: {HEADS}")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"unknown projection mode {self.projection!r}; known: {PROJECTIONS}")
        for field in ("d_x", "d_z", "d_h", "d_out"):
            if getattr(self, field) < 1:
                raise ConfigError(f"{field} must be >= 1, got {getattr(self, field)}")
        if self.L < 0:
            raise ConfigError(f"L must be >= 0, got {self.L}")
        if self.variant == "hourglass":
            if not self.d_z > self.d_x:
                raise ConfigError(
                    f"hourglass requires d_z > d_x, got d_z={self.d_z}, d_x={self.d_x}"
                )
            if self.L > 0 and not self.d_h < self.d_z:
                raise ConfigError(
                    f"hourglass requires d_h < d_z, got d_h={self.d_h}, d_z={self.d_z}"
                )
        elif self.L > 0 and not self.d_h > self.d_z:
            raise ConfigError(
                f"conventional requires d_h > d_z, got d_h={self.d_h}, d_z={self.d_z}"
            )


@dataclass(frozen=True)
class ParamCount:
    total: int
    trainable: int
    by_stage: dict


def param_count(config: ArchConfig) -> ParamCount:
    """Weight-only parameter accounting (biases and norm affines excluded).

    A fixed projection still contributes to `total` but not to `trainable`.
    """
    proj = config.d_x * config.d_z
    blocks = 2 * config.L * config.d_z * config.d_h
    head = config.d_z * config.d_out
    total = proj + blocks + head
    trainable = total - proj if config.projection == "fixed" else total
    return ParamCount(
        total=total,
        trainable=trainable,
        by_stage={"input_projection": proj, "blocks": blocks, "output_head": head},
    )


# ---------------------------------------------------------------------------
# network


class Network:
    """A concrete parameterization of an ArchConfig.

    Single-threaded during a forward/backward pair (layer caches); read-only
    inference on a loaded instance is safe to share.
    """

    def __init__(
        self,
        config: ArchConfig,
        *,
        init_seed: int = 0,
        dtype=tensor.DTYPE,
        projection_spec: randproj.ProjectionSpec | None = None,
        _init_weights: bool = True,
    ):
        self.config = config
        self.init_seed = init_seed
        self.dtype = np.dtype(dtype)
        if projection_spec is None:
            projection_spec = randproj.ProjectionSpec(
                seed=rng.derive_key(config.seed, init_seed, "input_projection"),
                rows=config.d_z,
                cols=config.d_x,
                distribution=config.distribution,
            )
        if (projection_spec.rows, projection_spec.cols) != (config.d_z, config.d_x):
            raise ConfigError(
                f"projection spec shape {projection_spec.rows}x{projection_spec.cols} "
                f"does not match d_z={config.d_z}, d_x={config.d_x}"
            )
        self.projection_spec = projection_spec

        if config.projection == "fixed":
            self.input_proj = None
            self._w_in = randproj.materialize(projection_spec, dtype=dtype)
        else:
            lin = LinearLayer(config.d_z, config.d_x, bias=False, dtype=dtype, name="input_proj")
            if _init_weights:
                lin.weight.value[...] = randproj.materialize(projection_spec, dtype=dtype)
            self.input_proj = lin
            self._w_in = None

        self.blocks = [
            ResidualBlock(
                config.variant,
                config.d_z,
                config.d_h,
                activation=config.activation,
                init_key=rng.derive_key(config.seed, init_seed, "block", i) if _init_weights else None,
                dtype=dtype,
                name=f"block{i}",
            )
            for i in range(config.L)
        ]
        self.head = LinearLayer(
            config.d_out,
            config.d_z,
            bias=True,
            init_key=rng.derive_key(config.seed, init_seed, "output_head") if _init_weights else None,
            dtype=dtype,
            name="head",
        )
        self._softmax_out: np.ndarray | None = None
        self._forward_done = False

    # -- structure ---------------------------------------------------------

    def parameters(self) -> list[Param]:
        params: list[Param] = []
        if self.input_proj is not None:
            params.extend(self.input_proj.params())
        for block in self.blocks:
            params.extend(block.params())
        params.extend(self.head.params())
        return params

    def weight_param_count(self) -> int:
        """Trainable weight-matrix entries; equals param_count(config).trainable."""
        n = 0
        if self.input_proj is not None:
            n += self.input_proj.weight.value.size
        for block in self.blocks:
            n += block.lin1.weight.value.size + block.lin2.weight.value.size
        n += self.head.weight.value.size
        return n

    def aux_param_count(self) -> int:
        """Biases and norm gains/shifts, reported separately from weights."""
        return sum(p.value.size for p in self.parameters()) - self.weight_param_count()

    def input_projection_matrix(self) -> np.ndarray:
        """The current W_in (regenerated view for fixed, live weight otherwise)."""
        if self.input_proj is not None:
            return self.input_proj.weight.value
        return self._w_in

    def astype(self, dtype) -> "Network":
        """Exact-valued copy in another dtype (float32 -> float64 is lossless)."""
        twin = Network(
            self.config,
            init_seed=self.init_seed,
            dtype=dtype,
            projection_spec=self.projection_spec,
            _init_weights=False,
        )
        for src, dst in zip(self.parameters(), twin.parameters()):
            dst.value[...] = src.value.astype(dtype)
        return twin

    # -- compute -----------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.config.d_x:
            raise ShapeError(f"input shape {x.shape} does not match d_x={self.config.d_x}")
        if not np.all(np.isfinite(x)):
            raise ShapeError("input contains non-finite values")
        if self.input_proj is not None:
            z = self.input_proj.forward(x)
        else:
            z = tensor.matmul(x, self._w_in.T)
        for block in self.blocks:
            z = block.forward(z)
        y = self.head.forward(z)
        if self.config.head == "classify":
            y = tensor.row_softmax(y)
            self._softmax_out = y
        self._forward_done = True
        return y

    def backward(self, grad_out: np.ndarray) -> None:
        """Accumulate grads on every trainable parameter; input grad discarded."""
        if not self._forward_done:
            raise StateError("backward called before forward")
        g = grad_out
        if self.config.head == "classify":
            s = self._softmax_out
            g = s * (g - (g * s).sum(axis=1, keepdims=True))
        g = self.head.backward(g)
        for block in reversed(self.blocks):
            g = block.backward(g)
        if self.input_proj is not None:
            self.input_proj.backward(g)

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grad()


# ---------------------------------------------------------------------------
# config <-> key=value text


def arch_to_kv(config: ArchConfig) -> dict[str, str]:
    return {
        "variant": config.variant,
        "d_x": str(config.d_x),
        "d_z": str(config.d_z),
        "d_h": str(config.d_h),
        "L": str(config.L),
        "d_out": str(config.d_out),
        "head": config.head,
        "projection": config.projection,
        "distribution": config.distribution,
        "activation": config.activation,
        "seed": str(config.seed),
    }


def arch_from_kv(kv: dict[str, str]) -> ArchConfig:
    try:
        return ArchConfig(
            variant=kv["variant"],
            d_x=int(kv["d_x"]),
            d_z=int(kv["d_z"]),
            d_h=int(kv["d_h"]),
            L=int(kv["L"]),
            d_out=int(kv["d_out"]),
            head=kv.get("head", "image"),
            projection=kv.get("projection", "trainable"),
            distribution=kv.get("distribution", "gaussian"),
            activation=kv.get("activation", "gelu"),
            seed=int(kv.get("seed", "0")),
        )
    except KeyError as exc:
        raise ConfigError(f"missing architecture key: {exc.args[0]}") from None
    except ValueError as exc:
        raise ConfigError(f"bad architecture value: {exc}") from None


# ---------------------------------------------------------------------------
# checkpoints


def _checkpoint_config_text(net: Network) -> str:
    kv = arch_to_kv(net.config)
    kv["init_seed"] = str(net.init_seed)
    algo, seed, rows, cols, dist = net.projection_spec.fields()
    kv.update(
        {
            "proj.algorithm": algo,
            "proj.seed": str(seed),
            "proj.rows": str(rows),
            "proj.cols": str(cols),
            "proj.distribution": dist,
        }
    )
    return "".join(f"{k}={kv[k]}\n" for k in sorted(kv))


def save(net: Network, path) -> None:
    """Write a checkpoint; fixed projections serialize as their 5-field spec."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    config_blob = _checkpoint_config_text(net).encode("utf-8")
    chunks.append(struct.pack("<I", len(config_blob)))
    chunks.append(config_blob)
    params = net.parameters()
    chunks.append(struct.pack("<I", len(params)))
    for p in params:
        name_blob = p.name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_blob)))
        chunks.append(name_blob)
        chunks.append(struct.pack("<BB", _DTYPE_CODES[p.value.dtype], p.value.ndim))
        chunks.append(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
        chunks.append(np.ascontiguousarray(p.value).astype(p.value.dtype.newbyteorder("<")).tobytes())
    payload = b"".join(chunks)
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(digest)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointTruncatedError(
                f"checkpoint ends at byte {len(self.blob)}, needed {self.pos + n}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load(path) -> Network:
    """Load a checkpoint saved by `save`, verifying the trailing checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 4 + 8:
        raise CheckpointTruncatedError(f"checkpoint is only {len(blob)} bytes")
    payload, digest = blob[:-8], blob[-8:]
    reader = _Reader(payload)
    magic = reader.take(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad checkpoint magic {magic!r}")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, supported: {CHECKPOINT_VERSION}")
    (config_len,) = reader.unpack("<I")
    config_blob = reader.take(config_len)
    (n_params,) = reader.unpack("<I")
    entries = []
    for _ in range(n_params):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        dtype_code, ndim = reader.unpack("<BB")
        if dtype_code not in _CODE_DTYPES:
            raise CheckpointFormatError(f"unknown dtype code {dtype_code} for {name!r}")
        dims = reader.unpack(f"<{ndim}I")
        dtype = _CODE_DTYPES[dtype_code]
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        raw = reader.take(count * dtype.itemsize)
        value = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(dims)
        entries.append((name, value))
    if reader.pos != len(payload):
        raise CheckpointFormatError(f"{len(payload) - reader.pos} unexpected trailing bytes")
    if hashlib.blake2b(payload, digest_size=8).digest() != digest:
        raise CheckpointChecksumError("checkpoint checksum mismatch")

    kv = {}
    for line in config_blob.decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        kv[key] = value
    config = arch_from_kv(kv)
    spec = randproj.spec_from_fields(
        kv["proj.algorithm"],
        int(kv["proj.seed"]),
        int(kv["proj.rows"]),
        int(kv["proj.cols"]),
        kv["proj.distribution"],
    )
    net = Network(
        config,
        init_seed=int(kv.get("init_seed", "0")),
        dtype=entries[0][1].dtype if entries else tensor.DTYPE,
        projection_spec=spec,
        _init_weights=False,
    )
    by_name = {p.name: p for p in net.parameters()}
    if set(by_name) != {name for name, _ in entries}:
        missing = set(by_name) - {name for name, _ in entries}
        extra = {name for name, _ in entries} - set(by_name)
        raise CheckpointFormatError(f"parameter set mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
    for name, value in entries:
        p = by_name[name]
        if p.value.shape != value.shape:
            raise CheckpointFormatError(f"{name}: shape {value.shape} != expected {p.value.shape}")
        p.value[...] = value
    return net


def config_with(config: ArchConfig, **changes) -> ArchConfig:
    """Convenience wrapper over dataclasses.replace with validation."""
    return replace(config, **changes)
