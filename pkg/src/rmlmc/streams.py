"""Deterministic RNG substreams keyed by (seed, purpose, index, ...)."""

import numpy as np

PILOT = 0
COUPLED = 1
INDEPENDENT = 2

LEVELS = 0
PATHS = 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream ``key`` of ``seed``.

    Distinct keys give statistically independent streams; the same key always
    reproduces the same stream regardless of how work is distributed.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
