"""Dense 2-D matrix kernels.

A Matrix is a C-contiguous 2-D numpy array (rows = batch, cols = features)
of float32; a float64 twin of every kernel exists for finite-difference
gradient checking and is selected simply by operand dtype. Data is row-major,
so `m.ravel()` is the flat storage and `m.shape == (rows, cols)`.

All kernels are deterministic for identical inputs; float32 matmul accumulates
in float64 before storing 32-bit results.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

DTYPE = np.float32
CHECK_DTYPE = np.float64

Matrix = np.ndarray


def matrix(data, dtype=DTYPE) -> Matrix:
    """Build a validated Matrix from nested lists or an array."""
    m = np.ascontiguousarray(data, dtype=dtype)
    if m.ndim != 2:
        raise ShapeError(f"matrix must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix entries must be finite")
    return m


def zeros(rows: int, cols: int, dtype=DTYPE) -> Matrix:
    return np.zeros((rows, cols), dtype=dtype)


def _require_2d(a: np.ndarray, name: str = "operand") -> None:
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")


def _require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """a[m,k] @ b[k,n] with 64-bit accumulation, stored in a's dtype."""
    _require_2d(a, "left operand")
    _require_2d(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}"
        )
    if a.dtype == np.float64 and b.dtype == np.float64:
        return a @ b
    out = a.astype(np.float64, copy=False) @ b.astype(np.float64, copy=False)
    return out.astype(a.dtype)


def add(a: Matrix, b: Matrix) -> Matrix:
    _require_same_shape(a, b)
    return a + b


def sub(a: Matrix, b: Matrix) -> Matrix:
    _require_same_shape(a, b)
    return a - b


def mul(a: Matrix, b: Matrix) -> Matrix:
    _require_same_shape(a, b)
    return a * b


def scale(a: Matrix, c: float) -> Matrix:
    return a * a.dtype.type(c)


def clamp(a: Matrix, lo: float, hi: float) -> Matrix:
    if lo > hi:
        raise DomainError(f"clamp bounds inverted: lo={lo} > hi={hi}")
    return np.clip(a, lo, hi)


def add_row_vector(a: Matrix, v: np.ndarray) -> Matrix:
    """Add a length-cols vector to every row (bias broadcast)."""
    if v.ndim != 1 or v.shape[0] != a.shape[1]:
        raise ShapeError(f"row vector of length {v.shape} does not fit {a.shape}")
    return a + v


def row_mean(a: Matrix) -> np.ndarray:
    """Per-row mean, shape [rows]."""
    _require_nonempty(a)
    return a.mean(axis=1)


def row_var(a: Matrix) -> np.ndarray:
    """Per-row biased variance (divide by cols), shape [rows]."""
    _require_nonempty(a)
    return a.var(axis=1)


def sum_sq(a: Matrix) -> float:
    """Sum of squared entries as a float64 scalar."""
    _require_nonempty(a)
    flat = a.ravel().astype(np.float64, copy=False)
    return float(flat @ flat)


def _require_nonempty(a: np.ndarray) -> None:
    _require_2d(a)
    if a.size == 0:
        raise DomainError(f"reduction over an empty matrix, shape {a.shape}")


def row_softmax(a: Matrix) -> Matrix:
    """Numerically stable softmax over each row."""
    _require_2d(a)
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
