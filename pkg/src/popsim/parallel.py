"""Process-pool helper for embarrassingly parallel instance runs.

Jobs carry their own derived rng seeds, so the result list is identical
whatever the worker count; workers only change the wall-clock time.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

__all__ = ["parallel_map"]


def parallel_map(fn, items, workers: int = 1) -> list:
    """Apply fn to every item, preserving order; workers <= 1 runs inline."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
