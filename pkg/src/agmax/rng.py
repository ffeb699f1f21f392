"""Seeded, splittable random streams.

Every random draw in the package goes through a ``numpy.random.Generator``
derived from an integer seed plus a path of integer keys. Two streams with
the same seed and path replay identically; streams with different paths are
statistically independent (``SeedSequence`` spawn keys).
"""

from __future__ import annotations

import zlib

import numpy as np

RngState = np.random.Generator


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    # stable across processes, unlike hash()
    return zlib.crc32(str(part).encode("utf-8"))


def make_rng(seed: int, *path) -> RngState:
    """Return the generator for ``seed`` at the given key path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def split(rng: RngState, n: int) -> list[RngState]:
    """Split ``n`` independent child streams off ``rng``.

    Splitting advances the parent's spawn counter, so the result depends on
    how many children were split before; it never consumes parent draws.
    """
    return rng.spawn(n)
