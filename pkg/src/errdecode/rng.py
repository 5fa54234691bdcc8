"""Deterministic random-number streams.

Every random choice in this package flows from a single 64-bit master seed.
Independent streams are derived by hashing a path of labels (strings or
integers) into a ``numpy.random.SeedSequence`` spawn key:

    rng = derive_rng(seed, "train", epoch_index)

The same (seed, path) pair always yields the same stream, and distinct paths
yield statistically independent streams. This is what makes whole pipeline
runs reproducible bit-for-bit from one seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_key(part) -> int:
    """Map one path component to a stable 32-bit integer."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"path components must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported path component type: {type(part)!r}")


def derive_seedseq(seed: int, *path) -> np.random.SeedSequence:
    """Build the SeedSequence for a derived stream."""
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_path_key(p) for p in path))


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Return a Generator for the stream identified by (seed, *path)."""
    return np.random.Generator(np.random.PCG64(derive_seedseq(seed, *path)))
