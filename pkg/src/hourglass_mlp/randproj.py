"""Seeded, regenerable random projection matrices.

A ProjectionSpec fully determines a d_z x d_x matrix; entries are a pure
function of (seed, row, col), so any row tile can be regenerated on the fly
and a checkpoint needs to store only the 5-field spec, never the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng, tensor
from .errors import ConfigError, DomainError, ShapeError

ALGORITHM_ID = "splitmix64-v1"

DISTRIBUTIONS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class ProjectionSpec:
    """Seed + shape + distribution tag; the matrix itself is implied.

    gaussian: N(0, 1/d_x) entries. rademacher: +-1/sqrt(d_x) entries.
    """

    seed: int
    rows: int
    cols: int
    distribution: str = "gaussian"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError(f"projection dims must be >= 1, got {self.rows}x{self.cols}")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigError(
                f"unknown projection distribution {self.distribution!r}; known: {DISTRIBUTIONS}"
            )

    def fields(self) -> tuple[str, int, int, int, str]:
        """The 5 serialized fields: no matrix payload ever hits disk."""
        return (ALGORITHM_ID, self.seed, self.rows, self.cols, self.distribution)


def spec_from_fields(algorithm: str, seed: int, rows: int, cols: int, distribution: str) -> ProjectionSpec:
    if algorithm != ALGORITHM_ID:
        raise ConfigError(f"unknown projection algorithm {algorithm!r}, expected {ALGORITHM_ID!r}")
    return ProjectionSpec(seed=int(seed), rows=int(rows), cols=int(cols), distribution=distribution)


def materialize(
    spec: ProjectionSpec,
    dtype=tensor.DTYPE,
    row_start: int = 0,
    row_end: int | None = None,
) -> np.ndarray:
    """Generate rows [row_start, row_end) of the projection matrix.

    Entry (r, c) is keyed by the flat counter r * cols + c, so a tile equals
    the corresponding slice of the full matrix bit for bit.
    """
    row_end = spec.rows if row_end is None else row_end
    if not (0 <= row_start <= row_end <= spec.rows):
        raise DomainError(f"bad row tile [{row_start}, {row_end}) for {spec.rows} rows")
    n_rows = row_end - row_start
    counters = np.arange(row_start * spec.cols, row_end * spec.cols, dtype=np.uint64)
    inv_sqrt_dx = 1.0 / np.sqrt(float(spec.cols))
    if spec.distribution == "gaussian":
        vals = rng.random_normal(spec.seed, counters) * inv_sqrt_dx
    else:
        bits = rng.random_u64(spec.seed, counters) & np.uint64(1)
        vals = np.where(bits == 1, inv_sqrt_dx, -inv_sqrt_dx)
    return vals.reshape(n_rows, spec.cols).astype(dtype)


def project(
    spec: ProjectionSpec,
    x: np.ndarray,
    streaming: bool = False,
    tile_rows: int = 256,
) -> np.ndarray:
    """x[B, d_x] -> x @ W.T with W = materialize(spec).

    With streaming=True the matrix is generated in row tiles of at most
    tile_rows x d_x entries, never held whole.
    """
    if x.ndim != 2 or x.shape[1] != spec.cols:
        raise ShapeError(f"input shape {x.shape} does not match projection cols {spec.cols}")
    if not streaming:
        return tensor.matmul(x, materialize(spec, dtype=x.dtype).T)
    if tile_rows < 1:
        raise DomainError(f"tile_rows must be >= 1, got {tile_rows}")
    out = np.empty((x.shape[0], spec.rows), dtype=x.dtype)
    for start in range(0, spec.rows, tile_rows):
        end = min(start + tile_rows, spec.rows)
        tile = materialize(spec, dtype=x.dtype, row_start=start, row_end=end)
        out[:, start:end] = tensor.matmul(x, tile.T)
    return out
