"""Seeded, counter-based random streams.

Every randomized computation takes a 64-bit seed. Replicates derive child seeds
through ``SeedSequence.spawn`` and each sample splits its seed into named
streams, so results do not depend on how work is scheduled across threads.
"""
from typing import Dict, List

import numpy as np

STREAM_NAMES = ("eigenvalues", "field", "haar", "init")


def derive_seeds(seed: int, count: int) -> List[int]:
    """Child 64-bit seeds for ``count`` independent replicates."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def spawn_streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(STREAM_NAMES, children)
    }


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
