"""Seeded sample streams.

Samples are drawn in fixed-size blocks; block ``b`` always comes from
``SeedSequence([seed, stream, b])``.  A given (seed, stream, index) therefore
maps to the same sample no matter how a caller chunks the work, which keeps
every Monte Carlo result reproducible from the seed alone.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

BLOCK = 1 << 16

# stream tags keep unrelated experiments on disjoint generators
STREAM_UNIT_CUBE = 0
STREAM_BOX = 1
STREAM_ANNULUS = 2
STREAM_ELLIPSOID = 3
STREAM_MATRICES = 4
STREAM_VOLUME = 5
STREAM_TAIL = 6


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream), int(block)])))


def uniform_blocks(
    n: int, dim: int, seed: int, stream: int = STREAM_UNIT_CUBE, block: int = BLOCK
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start_index, samples)`` with samples uniform on ``[0, 1)^dim``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    start = 0
    b = 0
    while start < n:
        m = min(block, n - start)
        rng = block_generator(seed, stream, b)
        yield start, rng.random((block, dim))[:m]
        start += m
        b += 1


def uniform_cube(n: int, dim: int, seed: int, stream: int = STREAM_UNIT_CUBE) -> np.ndarray:
    """All ``n`` samples at once (for small ``n``)."""
    if n == 0:
        return np.empty((0, dim))
    return np.concatenate([s for _, s in uniform_blocks(n, dim, seed, stream)])
