"""Deterministic RNG substreams.

Every sampling site derives its generator from the run seed plus a tuple key
(for example ``(phase, epoch, step)``) via ``numpy.random.SeedSequence`` spawn
keys. Serial and parallel execution therefore consume identical streams.
"""

from __future__ import annotations

import numpy as np

# fixed phase tags for substream keys
PHASE_EPOCH = 0
PHASE_DISCOVERY = 1
PHASE_MC = 2


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the given site key, independent of call order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
