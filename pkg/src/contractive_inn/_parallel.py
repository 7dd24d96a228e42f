"""Chunked, order-preserving data parallelism for per-sample work.

The chunking is fixed (independent of the thread count), so results are
identical whatever ``CONTRACTIVE_INN_THREADS`` is set to.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 256
ENV_VAR = "CONTRACTIVE_INN_THREADS"


def n_threads() -> int:
    raw = os.environ.get(ENV_VAR, "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        return os.cpu_count() or 1
    return value


def map_chunks(fn, m: int, chunk: int = CHUNK) -> list:
    """Apply ``fn`` to consecutive index chunks of ``range(m)``; results in chunk order."""
    chunks = [np.arange(s, min(s + chunk, m)) for s in range(0, m, chunk)]
    workers = min(n_threads(), len(chunks))
    if workers <= 1:
        return [fn(idx) for idx in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
