"""Order-preserving task map: the only place a worker pool exists.

Tasks are pure functions of picklable descriptors (every replica carries
its own stream id), so the results are identical for any worker count;
``ordered_map`` collects them in task order regardless of scheduling.
"""

from __future__ import annotations

import multiprocessing as mp
from typing import Callable, Sequence

__all__ = ["ordered_map"]


def ordered_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = mp.get_context("fork")
    with ctx.Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
