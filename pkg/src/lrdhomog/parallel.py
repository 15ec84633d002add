"""Ordered replicate execution on a thread pool.

Each replicate draws from its own counter-keyed stream, and results are
returned in replicate order, so reductions do not depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_CHUNK = 32


def map_replicates(fn, count, threads=1, chunk=DEFAULT_CHUNK):
    """[fn(0), ..., fn(count - 1)] computed on ``threads`` workers, in index order."""
    threads = max(1, int(threads))
    if threads == 1 or count <= chunk:
        return [fn(i) for i in range(count)]
    blocks = [range(a, min(a + chunk, count)) for a in range(0, count, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda block: [fn(i) for i in block], blocks)
        return [item for part in parts for item in part]


def stack_replicates(fn, count, threads=1, chunk=DEFAULT_CHUNK):
    return np.asarray(map_replicates(fn, count, threads, chunk))
