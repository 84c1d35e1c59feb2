"""Seed handling shared by every randomized operation."""

import numpy as np


def as_rng(seed) -> np.random.Generator:
    """Return a numpy Generator from an int seed, SeedSequence, Generator, or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
