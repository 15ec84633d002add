"""Counter-based random streams.

Every replicate owns a Philox stream keyed by ``(master_seed, experiment_id,
replicate)``. Streams never share state, so replicates can be generated in any
order or on any number of threads and still produce the same numbers.
"""

from __future__ import annotations

import zlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator]


def experiment_id(label: str) -> int:
    """Stable 32-bit identifier for a textual experiment/stage label."""
    return zlib.crc32(label.encode("utf-8"))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for ``(master_seed, *key)``."""
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replicate_stream(master_seed: int, label: str, index: int) -> np.random.Generator:
    return stream(master_seed, experiment_id(label), index)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))


def seed_value(seed: SeedLike):
    """Integer seed to record on results, or None when a Generator was passed."""
    return None if isinstance(seed, np.random.Generator) else int(seed)
