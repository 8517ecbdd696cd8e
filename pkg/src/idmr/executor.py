"""Deterministic ordered parallel map over independent tasks.

The per-choice subproblems of one update step, Monte-Carlo replications, and
bootstrap replicates are all dispatched through :func:`parallel_map`.  The
contract is that results come back in task order and are bitwise identical
for any worker count, so parallelism never changes estimates.  Nested calls
(a task that itself calls ``parallel_map``) run inline on the calling worker
to avoid oversubscription.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

from .exceptions import IdmrError

ENV_THREADS = "IDMR_THREADS"

T = TypeVar("T")
R = TypeVar("R")

_local = threading.local()
_pools: dict[int, ThreadPoolExecutor] = {}
_pools_lock = threading.Lock()


@dataclass(frozen=True)
class ExecutorConfig:
    """Worker count and tasks-per-unit chunking for the thread pool."""

    worker_count: int = 1
    chunking: int = 1

    def __post_init__(self):
        if self.worker_count < 1:
            raise IdmrError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.chunking < 1:
            raise IdmrError(f"chunking must be >= 1, got {self.chunking}")

    @classmethod
    def from_env(cls, default: int | None = None) -> "ExecutorConfig":
        """Read the worker count from IDMR_THREADS, else use the default.

        With no default, falls back to the machine's CPU count.
        """
        raw = os.environ.get(ENV_THREADS)
        if raw is not None:
            try:
                workers = int(raw)
            except ValueError:
                raise IdmrError(f"{ENV_THREADS} must be a positive integer, got {raw!r}") from None
            if workers < 1:
                raise IdmrError(f"{ENV_THREADS} must be a positive integer, got {raw!r}")
        elif default is not None:
            workers = default
        else:
            workers = os.cpu_count() or 1
        return cls(worker_count=workers)


def _pool(workers: int) -> ThreadPoolExecutor:
    with _pools_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="idmr")
            _pools[workers] = pool
        return pool


def parallel_map(
    tasks: Sequence[T], f: Callable[[T], R], cfg: ExecutorConfig | None = None
) -> list[R]:
    """Apply a pure function to every task, preserving task order.

    Errors are collected per task; the error with the smallest task index is
    raised after all tasks have finished, so failure messages are
    reproducible regardless of scheduling.
    """
    tasks = list(tasks)
    if cfg is None:
        cfg = ExecutorConfig()
    if not tasks:
        return []
    inline = cfg.worker_count == 1 or len(tasks) == 1 or getattr(_local, "in_worker", False)
    if inline:
        return [f(t) for t in tasks]

    def run_chunk(chunk: list[T]) -> list[tuple[bool, object]]:
        _local.in_worker = True
        out: list[tuple[bool, object]] = []
        for t in chunk:
            try:
                out.append((True, f(t)))
            except Exception as exc:  # noqa: BLE001 - re-raised below in task order
                out.append((False, exc))
        return out

    size = cfg.chunking
    chunks = [tasks[i : i + size] for i in range(0, len(tasks), size)]
    futures = [_pool(cfg.worker_count).submit(run_chunk, chunk) for chunk in chunks]
    flat: list[tuple[bool, object]] = []
    for fut in futures:
        flat.extend(fut.result())
    for ok, value in flat:
        if not ok:
            raise value  # type: ignore[misc]
    return [value for _, value in flat]  # type: ignore[misc]
