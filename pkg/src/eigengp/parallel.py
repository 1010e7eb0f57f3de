"""Deterministic replication runner.

BLAS pools are pinned to one thread for the whole parallel region, in both
the sequential and the threaded mode, so per-replication arithmetic is
identical regardless of the worker count.  Replication outputs are returned
in submission order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from threadpoolctl import threadpool_limits

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
