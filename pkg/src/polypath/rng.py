"""Deterministic random-stream derivation.

All randomness in this package flows from a single integer seed.  Independent
streams are derived as ``SeedSequence(seed, spawn_key=key)``, so results are
reproducible and independent of scheduling order when trials run concurrently.
"""

from __future__ import annotations

import numpy as np


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for stream ``key`` of the root seed.

    ``rng_stream(seed)`` is the root stream; ``rng_stream(seed, i)`` is the
    i-th child stream, ``rng_stream(seed, i, j)`` a grandchild, and so on.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
