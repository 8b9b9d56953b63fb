import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "NEUMANN_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_THREADS, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Ordered map; uses threads only when NEUMANN_LAB_THREADS > 1."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
