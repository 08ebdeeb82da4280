"""Thread plumbing for embarrassingly parallel per-path work.

Workers receive disjoint [start, stop) path ranges and write into
preallocated output slots, and all cross-path reductions happen afterwards
in fixed order on the calling thread, so results are bit-identical for any
thread count.  The default comes from the ANSCALE_THREADS environment
variable (1 when unset).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from .errors import DomainError

THREADS_ENV_VAR = "ANSCALE_THREADS"


def default_threads() -> int:
    """Thread count from the environment, or 1."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise DomainError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise DomainError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
    return value


def resolve_threads(threads: int | None) -> int:
    """Validate an explicit thread count or fall back to the default."""
    if threads is None:
        return default_threads()
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    return int(threads)


def run_chunked(
    worker: Callable[[int, int], None],
    n_items: int,
    threads: int | None = None,
    min_chunk: int = 1,
) -> None:
    """Run worker(start, stop) over a partition of range(n_items).

    The partition depends only on n_items and the resolved thread count's
    chunking floor, never on scheduling, and workers must not share mutable
    state beyond their own output slots.
    """
    k = resolve_threads(threads)
    if n_items <= 0:
        return
    if k == 1:
        worker(0, n_items)
        return
    # Fixed-size contiguous chunks; a few per thread so stragglers overlap.
    chunk = max(min_chunk, -(-n_items // (k * 4)))
    bounds = [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]
    with ThreadPoolExecutor(max_workers=k) as pool:
        # Consume results so worker exceptions propagate.
        list(pool.map(lambda be: worker(*be), bounds))
