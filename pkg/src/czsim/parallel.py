"""Deterministic block-parallel execution helper.

Work is split into fixed blocks before dispatch, so results are identical
for any worker count; ordering follows the input block order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def run_blocks(fn: Callable, tasks: Sequence[tuple], workers: int = 1) -> list:
    """Apply ``fn(*task)`` to every task, preserving input order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *task) for task in tasks]
        return [f.result() for f in futures]
