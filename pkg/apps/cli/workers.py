"""Process pool for independent runs (lambda points, seeds)."""

import logging
import os
from concurrent.futures import Executor, ProcessPoolExecutor
from typing import Any, Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_process_pool: Optional[ProcessPoolExecutor] = None


def get_worker_pool_config() -> dict:
    """Get worker pool configuration from environment or defaults"""
    return {"max_workers": int(os.getenv("FASTRESET_THREADS", "1"))}


def init_worker_pool(max_workers: Optional[int] = None):
    """Initialize the process pool with configurable parameters"""
    global _process_pool

    if _process_pool is not None:
        logger.warning("Worker pool already initialized")
        return

    config = get_worker_pool_config()
    if max_workers is not None:
        config["max_workers"] = max_workers

    try:
        _process_pool = ProcessPoolExecutor(max_workers=config["max_workers"])
        logger.info("Worker pool initialized with %d processes", config["max_workers"])
    except Exception:
        logger.exception("Failed to initialize worker pool")
        raise


def get_worker_pool() -> ProcessPoolExecutor:
    """Get the worker pool, initializing it if necessary"""
    if _process_pool is None:
        init_worker_pool()
    return _process_pool


def shutdown_worker_pool(wait: bool = True):
    """Shutdown the worker pool gracefully"""
    global _process_pool

    if _process_pool is not None:
        logger.info("Shutting down worker pool")
        _process_pool.shutdown(wait=wait)
        _process_pool = None


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Independent child streams of one root seed, one per task."""
    return np.random.SeedSequence(seed).spawn(n)


def map_tasks(
    func: Callable[..., Any],
    tasks: Sequence[tuple],
    workers: int = 1,
    executor: Optional[Executor] = None,
) -> list[Any]:
    """func(*task) for every task, in order.

    With one worker the tasks run inline, which keeps single runs free of
    pickling and subprocess start-up.
    """
    if workers <= 1 and executor is None:
        return [func(*task) for task in tasks]
    if executor is None:
        init_worker_pool(workers)
        executor = get_worker_pool()
    futures = [executor.submit(func, *task) for task in tasks]
    return [f.result() for f in futures]
