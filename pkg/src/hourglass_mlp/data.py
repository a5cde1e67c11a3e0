"""Dataset ingestion and task construction.

Images travel as flat float32 rows in [0, 1]; all randomness (splits, noise,
prototype picks, shuffles) is a pure function of named seeds via the
counter-based generator, so two runs with the same config see identical
batch streams.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigError, DataError, DomainError, IdxParseError, RawTensorParseError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

RAW_TENSOR_MAGIC = b"HGRT"
RAW_TENSOR_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """Flat [N, H*W*C] float32 images in [0,1] plus the spatial shape."""

    images: np.ndarray
    shape: tuple[int, int, int]
    labels: np.ndarray | None = None

    def __post_init__(self):
        h, w, c = self.shape
        if self.images.ndim != 2 or self.images.shape[1] != h * w * c:
            raise DomainError(
                f"images shape {self.images.shape} does not match spatial shape {self.shape}"
            )
        if self.labels is not None and len(self.labels) != len(self.images):
            raise DomainError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, indices) -> "Dataset":
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.images[indices], self.shape, labels)


@dataclass(frozen=True)
class Splits:
    train: Dataset
    val: Dataset
    test: Dataset


@dataclass(frozen=True)
class ImageBatch:
    """Model inputs and targets, both pixel-valued in [0, 1]."""

    images: np.ndarray
    targets: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.images.shape[0] != self.targets.shape[0]:
            raise DomainError(
                f"{self.images.shape[0]} inputs vs {self.targets.shape[0]} targets"
            )
        for name, arr in (("images", self.images), ("targets", self.targets)):
            lo, hi = float(arr.min(initial=0.0)), float(arr.max(initial=1.0))
            if lo < 0.0 or hi > 1.0:
                raise DomainError(f"{name} outside [0,1]: range [{lo}, {hi}]")

    def __len__(self) -> int:
        return self.images.shape[0]


TASKS = ("gen_classify", "denoise", "superres")


@dataclass(frozen=True)
class TaskSpec:
    task: str
    noise_std: float = 0.25
    downscale: int = 2
    augment: bool = False
    prototype_seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; known: {TASKS}")
        if self.task == "denoise" and not self.noise_std > 0:
            raise ConfigError(f"denoise requires noise_std > 0, got {self.noise_std}")
        if self.task == "superres" and self.downscale != 2:
            raise ConfigError(f"superres supports downscale=2 only, got {self.downscale}")


@dataclass(frozen=True)
class TaskData:
    train: ImageBatch
    val: ImageBatch
    test: ImageBatch
    in_shape: tuple[int, int, int]
    out_shape: tuple[int, int, int]
    prototypes: np.ndarray | None = None


# ---------------------------------------------------------------------------
# IDX files


def _read_exact(fh, n: int, path, what: str) -> bytes:
    blob = fh.read(n)
    if len(blob) != n:
        raise IdxParseError(f"{path}: truncated {what}: wanted {n} bytes, got {len(blob)}")
    return blob


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label file pair; pixels scale to [0,1] as byte/255."""
    with open(images_path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, images_path, "magic"))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxParseError(
                f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        count, n_rows, n_cols = struct.unpack(">III", _read_exact(fh, 12, images_path, "header"))
        payload = _read_exact(fh, count * n_rows * n_cols, images_path, "pixel payload")
        if fh.read(1):
            raise IdxParseError(f"{images_path}: trailing bytes after pixel payload")
    with open(labels_path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, labels_path, "magic"))
        if magic != IDX_LABELS_MAGIC:
            raise IdxParseError(
                f"{labels_path}: bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        (label_count,) = struct.unpack(">I", _read_exact(fh, 4, labels_path, "header"))
        labels_blob = _read_exact(fh, label_count, labels_path, "label payload")
    if label_count != count:
        raise IdxParseError(
            f"count mismatch: {count} images ({images_path}) vs {label_count} labels ({labels_path})"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float32) / np.float32(255.0)
    labels = np.frombuffer(labels_blob, dtype=np.uint8).astype(np.int64)
    return Dataset(pixels.reshape(count, n_rows * n_cols), (n_rows, n_cols, 1), labels)


def write_idx_images(path, images_u8: np.ndarray) -> None:
    """Write [N, H, W] uint8 images in canonical IDX layout."""
    if images_u8.ndim != 3 or images_u8.dtype != np.uint8:
        raise DomainError(f"expected uint8 [N,H,W], got {images_u8.dtype} {images_u8.shape}")
    n, h, w = images_u8.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w))
        fh.write(np.ascontiguousarray(images_u8).tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise DomainError("labels must be a 1-D array of bytes")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# raw tensor files (externally prepared RGB datasets, e.g. 32x32x3 subsets)


def load_raw_tensor(path) -> Dataset:
    """magic, u32 version, u32 count, u32 H/W/C (little-endian), then raw bytes."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header = struct.calcsize("<4sIIIII")
    if len(blob) < header:
        raise RawTensorParseError(f"{path}: file shorter than {header}-byte header")
    magic, version, count, h, w, c = struct.unpack("<4sIIIII", blob[:header])
    if magic != RAW_TENSOR_MAGIC:
        raise RawTensorParseError(f"{path}: bad magic {magic!r}, expected {RAW_TENSOR_MAGIC!r}")
    if version != RAW_TENSOR_VERSION:
        raise RawTensorParseError(f"{path}: unsupported version {version}")
    expected = count * h * w * c
    payload = blob[header:]
    if len(payload) != expected:
        raise RawTensorParseError(
            f"{path}: payload size mismatch: header implies {expected} bytes, file has {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float32) / np.float32(255.0)
    return Dataset(pixels.reshape(count, h * w * c), (h, w, c))


def write_raw_tensor(path, images_u8: np.ndarray) -> None:
    """Write [N, H, W, C] uint8 pixels in the raw-tensor layout."""
    if images_u8.ndim != 4 or images_u8.dtype != np.uint8:
        raise DomainError(f"expected uint8 [N,H,W,C], got {images_u8.dtype} {images_u8.shape}")
    n, h, w, c = images_u8.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIIII", RAW_TENSOR_MAGIC, RAW_TENSOR_VERSION, n, h, w, c))
        fh.write(np.ascontiguousarray(images_u8).tobytes())


# ---------------------------------------------------------------------------
# splits and task construction


def split(
    train_set: Dataset,
    test_set: Dataset,
    seed: int,
    train_size: int = 50000,
    val_size: int = 10000,
) -> Splits:
    """Shuffled, disjoint train/val partition; the test set passes through."""
    n = len(train_set)
    if n < train_size + val_size:
        raise DomainError(
            f"need {train_size + val_size} training samples for the split, have {n}"
        )
    perm = rng.random_permutation(rng.derive_key(seed, "train_val_split"), n)
    return Splits(
        train=train_set.subset(perm[:train_size]),
        val=train_set.subset(perm[train_size : train_size + val_size]),
        test=test_set,
    )


def split_indices(seed: int, n: int, train_size: int = 50000, val_size: int = 10000):
    """The index lists behind `split`, exposed for determinism checks."""
    perm = rng.random_permutation(rng.derive_key(seed, "train_val_split"), n)
    return perm[:train_size], perm[train_size : train_size + val_size]


def corrupt_images(clean: np.ndarray, std: float, noise_seed: int, stream: str = "") -> np.ndarray:
    """clamp(clean + N(0, std^2), 0, 1); noise is keyed by (seed, row, pixel)."""
    if std <= 0:
        raise DomainError(f"noise std must be positive, got {std}")
    key = rng.derive_key(noise_seed, "gaussian_noise", stream)
    counters = np.arange(clean.size, dtype=np.uint64)
    noise = rng.random_normal(key, counters).reshape(clean.shape) * std
    return np.clip(clean + noise.astype(clean.dtype), 0.0, 1.0)


def corrupt_gaussian(batch: ImageBatch, std: float, noise_seed: int, stream: str = "") -> ImageBatch:
    """Noisy inputs, clean targets; targets are the incoming batch's targets."""
    noisy = corrupt_images(batch.targets, std, noise_seed, stream)
    return ImageBatch(noisy, batch.targets, batch.labels)


def _cubic_weights(a: float = -0.5) -> np.ndarray:
    """Tap weights of the separable cubic kernel at offsets (1.5, .5, -.5, -1.5).

    Factor-2 downsampling with centers aligned at s = 2i + 0.5 hits the same
    fractional offset for every output pixel, so the 4 weights are constant.
    """
    def kernel(t: float) -> float:
        t = abs(t)
        if t <= 1.0:
            return (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
        if t < 2.0:
            return a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
        return 0.0

    return np.array([kernel(1.5), kernel(0.5), kernel(-0.5), kernel(-1.5)], dtype=np.float64)


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    # mirror without repeating the border sample: -1 -> 1, n -> n-2
    idx = np.abs(idx)
    return np.where(idx >= n, 2 * (n - 1) - idx, idx)


def _downscale_axis_2x(stack: np.ndarray, axis: int) -> np.ndarray:
    n = stack.shape[axis]
    out_n = n // 2
    weights = _cubic_weights()
    base = 2 * np.arange(out_n)
    out = np.zeros(stack.shape[:axis] + (out_n,) + stack.shape[axis + 1 :], dtype=np.float64)
    for k, w in enumerate(weights):
        taps = _reflect(base + (k - 1), n)
        out += w * np.take(stack, taps, axis=axis)
    return out


def bicubic_downscale_2x(images: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    """Halve H and W of flat [N, H*W*C] images with the a=-0.5 cubic kernel.

    Returns raw (unclipped) float values; callers clamp before building an
    ImageBatch. Both spatial dims must be even.
    """
    h, w, c = shape
    if h % 2 or w % 2:
        raise DomainError(f"bicubic 2x downscale needs even spatial dims, got {h}x{w}")
    stack = images.reshape(-1, h, w, c).astype(np.float64)
    stack = _downscale_axis_2x(stack, axis=1)
    stack = _downscale_axis_2x(stack, axis=2)
    return stack.reshape(images.shape[0], (h // 2) * (w // 2) * c).astype(images.dtype)


def flip_images(images: np.ndarray, shape: tuple[int, int, int], horizontal: bool, vertical: bool) -> np.ndarray:
    h, w, c = shape
    stack = images.reshape(-1, h, w, c)
    if horizontal:
        stack = stack[:, :, ::-1, :]
    if vertical:
        stack = stack[:, ::-1, :, :]
    return np.ascontiguousarray(stack).reshape(images.shape)


def augment_flips(batch: ImageBatch, in_shape, out_shape) -> ImageBatch:
    """4x the batch: original, horizontal, vertical, and combined flips.

    Inputs and targets are flipped consistently, each in its own geometry.
    """
    images, targets = [batch.images], [batch.targets]
    for horizontal, vertical in ((True, False), (False, True), (True, True)):
        images.append(flip_images(batch.images, in_shape, horizontal, vertical))
        targets.append(flip_images(batch.targets, out_shape, horizontal, vertical))
    labels = None if batch.labels is None else np.tile(batch.labels, 4)
    return ImageBatch(np.concatenate(images), np.concatenate(targets), labels)


def build_prototypes(dataset: Dataset, prototype_seed: int, n_classes: int = 10) -> np.ndarray:
    """One deterministically chosen training image per class, stacked [C, d]."""
    if dataset.labels is None:
        raise DataError("prototype selection needs a labeled dataset")
    rows = []
    for cls in range(n_classes):
        candidates = np.flatnonzero(dataset.labels == cls)
        if candidates.size == 0:
            raise DataError(f"no samples of class {cls} available for prototypes")
        pick = candidates[rng.random_index(rng.derive_key(prototype_seed, "prototype", cls), candidates.size)]
        rows.append(dataset.images[pick])
    return np.stack(rows)


def _limit(ds: Dataset, n: int | None) -> Dataset:
    return ds if n is None or n >= len(ds) else ds.subset(np.arange(n))


def build_task(
    splits: Splits,
    spec: TaskSpec,
    noise_seed: int = 0,
    limits: tuple[int | None, int | None, int | None] = (None, None, None),
) -> TaskData:
    """Turn clean splits into per-task (input, target) batches.

    Augmentation (when enabled) applies to the training split only, before
    corruption/downscaling so flipped samples get their own noise.
    """
    shape = splits.train.shape
    prototypes = None
    named = {}
    for name, ds, lim in (
        ("train", splits.train, limits[0]),
        ("val", splits.val, limits[1]),
        ("test", splits.test, limits[2]),
    ):
        ds = _limit(ds, lim)
        clean = ImageBatch(ds.images, ds.images, ds.labels)
        if spec.augment and name == "train":
            clean = augment_flips(clean, shape, shape)
        named[name] = clean

    if spec.task == "denoise":
        batches = {
            name: corrupt_gaussian(b, spec.noise_std, noise_seed, stream=name)
            for name, b in named.items()
        }
        in_shape = out_shape = shape
    elif spec.task == "superres":
        h, w, c = shape
        in_shape, out_shape = (h // 2, w // 2, c), shape
        batches = {}
        for name, b in named.items():
            low = np.clip(bicubic_downscale_2x(b.targets, shape), 0.0, 1.0)
            batches[name] = ImageBatch(low, b.targets, b.labels)
    else:  # gen_classify
        prototypes = build_prototypes(splits.train, spec.prototype_seed)
        batches = {}
        for name, b in named.items():
            if b.labels is None:
                raise DataError(f"gen_classify needs labels on the {name} split")
            batches[name] = ImageBatch(b.images, prototypes[b.labels], b.labels)
        in_shape = out_shape = shape

    return TaskData(
        train=batches["train"],
        val=batches["val"],
        test=batches["test"],
        in_shape=in_shape,
        out_shape=out_shape,
        prototypes=prototypes,
    )
