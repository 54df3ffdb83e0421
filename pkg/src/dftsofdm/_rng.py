"""Seed handling shared by the Monte-Carlo loops.

One master seed fans out into independent child streams through
``numpy.random.SeedSequence.spawn``; work is cut into fixed-size chunks
so the result never depends on the number of workers.
"""

import numpy as np


def seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence(seed)


def spawn(seed, n):
    return seed_sequence(seed).spawn(n)


def chunked_streams(seed, n_total, chunk):
    """Yield ``(start, size, rng)`` covering ``n_total`` items in chunks."""
    n_chunks = -(-n_total // chunk)
    for i, child in enumerate(spawn(seed, n_chunks)):
        start = i * chunk
        yield start, min(chunk, n_total - start), np.random.default_rng(child)


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))
