"""Chunked path execution on a thread pool.

Every chunk is a contiguous block of path indices; results come back in index
order whatever the scheduling, and each path's randomness depends only on
``(master_seed, path_index)``.  The compiled kernels release the GIL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np


def thread_count() -> int:
    """Worker cap: ``CPSIM_THREADS`` if set, otherwise the CPU count."""
    env = os.environ.get("CPSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def path_chunks(n_paths: int, chunk: int) -> list[np.ndarray]:
    return [np.arange(a, min(a + chunk, n_paths), dtype=np.int64) for a in range(0, n_paths, chunk)]


def map_chunks(fn: Callable[[np.ndarray], object], n_paths: int, chunk: int) -> list:
    """Apply ``fn`` to each block of path indices; output list is in block order."""
    blocks = path_chunks(n_paths, chunk)
    workers = min(thread_count(), len(blocks))
    if workers <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, blocks))
