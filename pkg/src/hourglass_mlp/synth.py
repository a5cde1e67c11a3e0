"""Deterministic synthetic digit corpus.

Renders MNIST-shaped (28x28 grayscale, labels 0-9) digit glyphs with
per-sample affine jitter, entirely from the counter-based generator, and
writes them as canonical IDX files. Useful wherever the real corpus is not
available: the files are byte-compatible with the IDX loader, so the rest of
the pipeline is exercised unchanged.
"""

from __future__ import annotations

import os

import numpy as np

from . import rng
from .data import write_idx_images, write_idx_labels

_GLYPHS_TXT = [
    # 5x7 bitmaps, one string per row, digits 0..9
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
]

IMG_SIZE = 28
_GLYPH_H, _GLYPH_W = 7, 5
_CELL_W, _CELL_H = 2.5, 2.6  # pixels per glyph cell before jitter


def _glyph_array() -> np.ndarray:
    """[10, 9, 7] float glyphs with a one-cell zero border for sampling."""
    raw = np.array(
        [[[int(ch) for ch in row] for row in glyph] for glyph in _GLYPHS_TXT], dtype=np.float64
    )
    padded = np.zeros((10, _GLYPH_H + 2, _GLYPH_W + 2))
    padded[:, 1:-1, 1:-1] = raw
    return padded


def _uniform(key: int, n: int, lo: float, hi: float) -> np.ndarray:
    return lo + (hi - lo) * rng.random_uniform(key, np.arange(n, dtype=np.uint64))


def render_digits(n: int, seed: int, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Render n digit images; returns (uint8 [n,28,28], int64 labels [n]).

    Sample i depends only on (seed, i), so prefixes of a larger corpus are
    stable.
    """
    glyphs = _glyph_array().reshape(10, -1)
    pad_w = _GLYPH_W + 2
    labels = (rng.random_u64(rng.derive_key(seed, "labels"), np.arange(n, dtype=np.uint64)) % np.uint64(10)).astype(np.int64)

    theta = _uniform(rng.derive_key(seed, "rot"), n, -0.17, 0.17)
    scale = np.exp(_uniform(rng.derive_key(seed, "scale"), n, -0.12, 0.12))
    aspect = np.exp(_uniform(rng.derive_key(seed, "aspect"), n, -0.08, 0.08))
    shear = _uniform(rng.derive_key(seed, "shear"), n, -0.12, 0.12)
    tx = _uniform(rng.derive_key(seed, "tx"), n, -2.2, 2.2)
    ty = _uniform(rng.derive_key(seed, "ty"), n, -2.2, 2.2)
    bright = _uniform(rng.derive_key(seed, "bright"), n, 0.80, 1.0)

    grid = np.arange(IMG_SIZE, dtype=np.float64) - (IMG_SIZE - 1) / 2.0
    gy = grid[:, None]  # [28, 1]
    gx = grid[None, :]  # [1, 28]

    out = np.empty((n, IMG_SIZE, IMG_SIZE), dtype=np.uint8)
    for start in range(0, n, chunk):
        end = min(start + chunk, n)
        sl = slice(start, end)
        cos = np.cos(theta[sl])[:, None, None]
        sin = np.sin(theta[sl])[:, None, None]
        px = gx - tx[sl][:, None, None]
        py = gy - ty[sl][:, None, None]
        u = cos * px + sin * py
        v = -sin * px + cos * py
        u = u + shear[sl][:, None, None] * v
        col = u / (_CELL_W * (scale * aspect)[sl][:, None, None]) + (_GLYPH_W - 1) / 2.0
        row = v / (_CELL_H * (scale / aspect)[sl][:, None, None]) + (_GLYPH_H - 1) / 2.0

        # bilinear sample from the zero-padded glyph of each sample's class
        r0 = np.floor(row).astype(np.int64)
        c0 = np.floor(col).astype(np.int64)
        fr = row - r0
        fc = col - c0
        r0p = np.clip(r0 + 1, 0, _GLYPH_H + 1)
        r1p = np.clip(r0 + 2, 0, _GLYPH_H + 1)
        c0p = np.clip(c0 + 1, 0, pad_w - 1)
        c1p = np.clip(c0 + 2, 0, pad_w - 1)
        cls = labels[sl][:, None, None]
        g00 = glyphs[cls, r0p * pad_w + c0p]
        g01 = glyphs[cls, r0p * pad_w + c1p]
        g10 = glyphs[cls, r1p * pad_w + c0p]
        g11 = glyphs[cls, r1p * pad_w + c1p]
        val = (1 - fr) * ((1 - fc) * g00 + fc * g01) + fr * ((1 - fc) * g10 + fc * g11)
        val = np.power(val, 0.8) * bright[sl][:, None, None]
        out[sl] = np.round(np.clip(val, 0.0, 1.0) * 255.0).astype(np.uint8)
    return out, labels


TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


def write_synthetic_corpus(out_dir, seed: int = 0, n_train: int = 60000, n_test: int = 10000) -> dict:
    """Write a train/test corpus under the canonical MNIST file names."""
    os.makedirs(out_dir, exist_ok=True)
    images, labels = render_digits(n_train + n_test, seed)
    paths = {
        "train_images": os.path.join(out_dir, TRAIN_IMAGES),
        "train_labels": os.path.join(out_dir, TRAIN_LABELS),
        "test_images": os.path.join(out_dir, TEST_IMAGES),
        "test_labels": os.path.join(out_dir, TEST_LABELS),
    }
    write_idx_images(paths["train_images"], images[:n_train])
    write_idx_labels(paths["train_labels"], labels[:n_train])
    write_idx_images(paths["test_images"], images[n_train:])
    write_idx_labels(paths["test_labels"], labels[n_train:])
    return paths
