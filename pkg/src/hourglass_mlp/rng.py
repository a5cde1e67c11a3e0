"""Counter-based deterministic random numbers.

Every random quantity in this package (weight init, projection entries, noise
fields, shuffles, prototype picks) is a pure function of an integer key and an
explicit counter, built on the splitmix64 finalizer. Unlike a sequential-stream
PRNG, value i never depends on values 0..i-1, so any sub-block of a random
matrix can be regenerated independently and results are identical across
processes and platforms (integer mixing plus exactly-rounded IEEE arithmetic;
log/cos enter only through float64 and are rounded away by float32 storage).
"""

from __future__ import annotations

import hashlib

import numpy as np

_PHI = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = float(2.0**-53)


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_key(*parts: int | str) -> int:
    """Fold integers/strings into a single 64-bit key.

    Strings are hashed with blake2b-64 so stream labels like "noise.train"
    yield unrelated keys.
    """
    with np.errstate(over="ignore"):
        key = np.uint64(0x243F6A8885A308D3)
        for part in parts:
            if isinstance(part, str):
                digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
                value = np.uint64(int.from_bytes(digest, "little"))
            else:
                value = np.uint64(int(part) & 0xFFFFFFFFFFFFFFFF)
            key = _mix((key + value) * _PHI + _MIX1)
        return int(key[()] if isinstance(key, np.ndarray) else key)


def random_u64(key: int, counters: np.ndarray) -> np.ndarray:
    """uint64 hash per counter; counters may be any integer ndarray."""
    with np.errstate(over="ignore"):
        c = np.ascontiguousarray(counters, dtype=np.uint64)
        return _mix(np.uint64(key) + c * _PHI)


def random_uniform(key: int, counters: np.ndarray) -> np.ndarray:
    """float64 uniforms in [0, 1), one per counter."""
    return (random_u64(key, counters) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def random_normal(key: int, counters: np.ndarray) -> np.ndarray:
    """float64 standard normals via Box-Muller, one per counter.

    Two decorrelated sub-keys supply the pair of uniforms so a single counter
    maps to a single normal value.
    """
    k1 = derive_key(key, 0x5BF0)
    k2 = derive_key(key, 0xA1CE)
    # u1 in (0, 1] keeps the log finite.
    u1 = ((random_u64(k1, counters) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = random_uniform(k2, counters)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def random_permutation(key: int, n: int) -> np.ndarray:
    """Deterministic permutation of range(n) (argsort of per-index hashes)."""
    if n < 0:
        raise ValueError(f"permutation length must be >= 0, got {n}")
    return np.argsort(random_u64(key, np.arange(n, dtype=np.uint64)), kind="stable")


def random_index(key: int, n: int) -> int:
    """Deterministic index in [0, n)."""
    if n <= 0:
        raise ValueError(f"need a positive population, got {n}")
    return int(random_u64(key, np.asarray([0], dtype=np.uint64))[0] % np.uint64(n))
