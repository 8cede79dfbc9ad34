"""Per-utterance fan-out.

Workers compute; the calling thread is the single collector and receives
results in input order, so anything it writes is independent of scheduling.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, TypeVar

from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_jobs(jobs: Optional[int]) -> int:
    """Validate a worker count; None means one worker."""
    if jobs is None:
        return 1
    if jobs < 1:
        raise InvalidInput(f"jobs must be >= 1, got {jobs}", field="jobs")
    return jobs


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: Optional[int] = 1) -> list[R]:
    """Apply fn to every item, in parallel when jobs > 1, keeping input order.

    The first exception raised by any call propagates to the caller.
    """
    workers = resolve_jobs(jobs)
    batch: Sequence[T] = list(items)
    if workers == 1 or len(batch) <= 1:
        return [fn(item) for item in batch]

    logger.debug(f"Fanning {len(batch)} items out to {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, batch))
