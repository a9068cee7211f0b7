"""Thread-pool map whose results never depend on the thread count."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "RIPKIT_THREADS"


def default_threads() -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pmap(fn, items, threads: int | None = None):
    """Ordered map; work items must carry their own RNG streams."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
