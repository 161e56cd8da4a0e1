from __future__ import annotations

import asyncio
import logging
import time
from typing import Callable, List, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")


class SampleScheduler:
    """
    Bounded worker pool for Monte Carlo chunks.
    - Enforces a single concurrency cap (Semaphore) for chunks in flight
    - Runs each chunk in a worker thread (numpy releases the GIL in its kernels)
    - Returns results in submission order so reductions stay deterministic
    """

    def __init__(self, *, max_concurrency: int = 1) -> None:
        if max_concurrency < 1:
            raise ValueError(f"max_concurrency must be >= 1, got {max_concurrency}")
        self.max_concurrency = max_concurrency
        self._inflight = 0
        self._completed = 0

    @property
    def completed(self) -> int:
        return self._completed

    async def map(self, fn: Callable[[int], T], chunk_ids: Sequence[int]) -> List[T]:
        sem = asyncio.Semaphore(self.max_concurrency)

        async def _run(chunk_id: int) -> T:
            async with sem:
                self._inflight += 1
                start = time.perf_counter()
                try:
                    return await asyncio.to_thread(fn, chunk_id)
                finally:
                    self._inflight -= 1
                    self._completed += 1
                    logger.debug(
                        "Chunk done | chunk=%d inflight=%d completed=%d ms=%.1f",
                        chunk_id,
                        self._inflight,
                        self._completed,
                        (time.perf_counter() - start) * 1000,
                    )

        return list(await asyncio.gather(*(_run(c) for c in chunk_ids)))

    def run_sync(self, fn: Callable[[int], T], chunk_ids: Sequence[int]) -> List[T]:
        """Synchronous entry point; runs inline when called from inside an event loop."""
        if self.max_concurrency == 1:
            return [self._inline(fn, c) for c in chunk_ids]
        try:
            asyncio.get_running_loop()
        except RuntimeError:
            return asyncio.run(self.map(fn, chunk_ids))
        logger.debug("Event loop already running; executing %d chunks inline", len(chunk_ids))
        return [self._inline(fn, c) for c in chunk_ids]

    def _inline(self, fn: Callable[[int], T], chunk_id: int) -> T:
        result = fn(chunk_id)
        self._completed += 1
        return result


def chunk_bounds(total: int, chunk_size: int) -> List[tuple[int, int]]:
    """Split ``total`` samples into fixed-size [start, stop) chunks."""
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def sample_in_chunks(
    samples: int,
    draw_chunk: Callable[[int, int], np.ndarray],
    *,
    chunk_size: int,
    threads: int = 1,
) -> np.ndarray:
    """
    Evaluate ``draw_chunk(chunk_id, count)`` over fixed-size chunks and
    concatenate the per-sample values in chunk order. The chunk layout only
    depends on ``samples`` and ``chunk_size``, never on ``threads``.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    bounds = chunk_bounds(samples, chunk_size)
    scheduler = SampleScheduler(max_concurrency=threads)
    parts = scheduler.run_sync(lambda c: draw_chunk(c, bounds[c][1] - bounds[c][0]), range(len(bounds)))
    return np.concatenate(parts)
