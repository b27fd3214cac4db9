"""Order-preserving parallel map with a global worker cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_MAX_WORKERS = None


def set_max_workers(n: int | None) -> None:
    """Cap worker threads for every parallel stage (None = CPU count)."""
    global _MAX_WORKERS
    if n is not None and n < 1:
        raise ValueError("thread count must be positive")
    _MAX_WORKERS = n
    if n is not None:
        try:
            import numba

            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
        except Exception:  # pragma: no cover - numba without threading layer
            pass


def max_workers() -> int:
    return _MAX_WORKERS or os.cpu_count() or 1


def pmap(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]`` evaluated on a thread pool; result order is kept."""
    items = list(items)
    n = min(workers or max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
