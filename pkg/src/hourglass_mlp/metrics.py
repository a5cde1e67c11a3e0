"""PSNR, SSIM, MSE, and nearest-prototype accuracy.

PSNR uses one global MSE over the whole evaluation set (permutation-invariant
by construction) with peak 1.0 for [0,1] images; predictions are clamped to
[0,1] before any metric. Zero error reports the 99 dB cap so downstream
frontier code stays total-ordered.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr_db: float
    ssim: float
    n_samples: int
    accuracy: float | None = None

    def as_row(self) -> dict:
        return {
            "mse": self.mse,
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
            "accuracy": "" if self.accuracy is None else self.accuracy,
        }


def _clamped_mse(pred: np.ndarray, target: np.ndarray) -> float:
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} vs target shape {target.shape}")
    diff = np.clip(pred, 0.0, 1.0).astype(np.float64) - target.astype(np.float64)
    # exactly-rounded sum of per-row sums: invariant under sample permutation
    row_sums = (diff * diff).sum(axis=1)
    return math.fsum(row_sums.tolist()) / diff.size


def psnr_from_mse(mse: float) -> float:
    if mse <= 0.0:
        return PSNR_CAP_DB
    return 10.0 * math.log10(1.0 / mse)


def psnr(pred: np.ndarray, target: np.ndarray) -> float:
    """10*log10(1/MSE) over the whole set, pred clamped to [0,1] first."""
    return psnr_from_mse(_clamped_mse(pred, target))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(stack: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable windowed mean over [M, H, W], valid region only."""
    k = kernel.size
    v = sliding_window_view(stack, k, axis=1)
    v = np.tensordot(v, kernel, axes=([-1], [0]))
    v = sliding_window_view(v, k, axis=2)
    return np.tensordot(v, kernel, axes=([-1], [0]))


def _ssim_planes(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Mean SSIM per [M, H, W] plane with the standard windowed statistics."""
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    h, w = p.shape[1], p.shape[2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        warnings.warn(
            f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window; "
            "using global statistics",
            stacklevel=3,
        )
        axes = (1, 2)
        mu_p, mu_t = p.mean(axis=axes), t.mean(axis=axes)
        var_p, var_t = p.var(axis=axes), t.var(axis=axes)
        cov = (p * t).mean(axis=axes) - mu_p * mu_t
        return ((2 * mu_p * mu_t + c1) * (2 * cov + c2)) / (
            (mu_p**2 + mu_t**2 + c1) * (var_p + var_t + c2)
        )
    kernel = _gaussian_window()
    mu_p = _filter_valid(p, kernel)
    mu_t = _filter_valid(t, kernel)
    var_p = _filter_valid(p * p, kernel) - mu_p * mu_p
    var_t = _filter_valid(t * t, kernel) - mu_t * mu_t
    cov = _filter_valid(p * t, kernel) - mu_p * mu_t
    num = (2 * mu_p * mu_t + c1) * (2 * cov + c2)
    den = (mu_p**2 + mu_t**2 + c1) * (var_p + var_t + c2)
    return (num / den).mean(axis=(1, 2))


def ssim(pred: np.ndarray, target: np.ndarray, shape: tuple[int, int, int], chunk: int = 256) -> float:
    """Channel-averaged windowed SSIM, mean over images; pred clamped first."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} vs target shape {target.shape}")
    h, w, c = shape
    n = pred.shape[0]
    if pred.shape[1] != h * w * c:
        raise ShapeError(f"flat width {pred.shape[1]} does not match shape {shape}")
    p_all = np.clip(pred, 0.0, 1.0).astype(np.float64).reshape(n, h, w, c)
    t_all = target.astype(np.float64).reshape(n, h, w, c)
    per_image: list[float] = []
    for start in range(0, n, chunk):
        end = min(start + chunk, n)
        # fold channels into the stack axis, average back per image
        p = np.moveaxis(p_all[start:end], 3, 1).reshape(-1, h, w)
        t = np.moveaxis(t_all[start:end], 3, 1).reshape(-1, h, w)
        per_plane = _ssim_planes(p, t).reshape(end - start, c)
        per_image.extend(per_plane.mean(axis=1).tolist())
    # fsum keeps the mean invariant under sample permutation
    return math.fsum(per_image) / n


def proto_accuracy(pred: np.ndarray, prototypes: np.ndarray, labels: np.ndarray) -> float:
    """Fraction classified right by argmin-MSE against the class prototypes.

    Ties break toward the lowest class index.
    """
    if pred.shape[1] != prototypes.shape[1]:
        raise ShapeError(
            f"prediction width {pred.shape[1]} vs prototype width {prototypes.shape[1]}"
        )
    dists = np.empty((pred.shape[0], prototypes.shape[0]), dtype=np.float64)
    for cls in range(prototypes.shape[0]):
        diff = pred.astype(np.float64) - prototypes[cls].astype(np.float64)
        dists[:, cls] = (diff * diff).mean(axis=1)
    correct = int((np.argmin(dists, axis=1) == labels).sum())
    return correct / len(labels)


def evaluate_images(
    pred: np.ndarray,
    target: np.ndarray,
    shape: tuple[int, int, int],
    prototypes: np.ndarray | None = None,
    labels: np.ndarray | None = None,
) -> MetricReport:
    """Full MetricReport for a prediction set (accuracy only with prototypes)."""
    mse = _clamped_mse(pred, target)
    accuracy = None
    if prototypes is not None and labels is not None:
        accuracy = proto_accuracy(np.clip(pred, 0.0, 1.0), prototypes, labels)
    return MetricReport(
        mse=mse,
        psnr_db=psnr_from_mse(mse),
        ssim=ssim(pred, target, shape),
        n_samples=pred.shape[0],
        accuracy=accuracy,
    )
