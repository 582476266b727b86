"""Small deterministic thread-pool helper.

Results come back in input order regardless of thread count, and every
reduction in this package is exactly rounded, so parallel runs are
bit-identical to serial ones.
"""

from concurrent.futures import ThreadPoolExecutor

__all__ = ["parallel_map"]


def parallel_map(fn, items, threads: int = 1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
