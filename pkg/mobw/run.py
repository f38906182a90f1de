"""Utility to run independent jobs concurrently in a process pool with a timeout."""

import asyncio
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import Any, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _stop_workers(pool: ProcessPoolExecutor, grace: float = 1.0) -> None:
    """Cancels pending jobs, sends SIGTERM to every worker, and SIGKILL to any still alive after `grace` seconds."""
    # shutdown() drops the executor's process table, so take it first
    processes = list((pool._processes or {}).values())
    pool.shutdown(wait=False, cancel_futures=True)
    for process in processes:
        process.terminate()
    for process in processes:
        process.join(timeout=grace)
        if process.is_alive():
            process.kill()
            process.join()


def _capture(fn: Callable[..., T], args: tuple) -> T | Exception:
    try:
        return fn(*args)
    except Exception as e:
        return e


async def run(
    fn: Callable[..., T],
    jobs: Sequence[tuple[Any, ...]],
    workers: int = 1,
    timeout: float | None = None,  # seconds
) -> list[T | Exception]:
    """
    Calls fn(*job) for every job and returns the results in job order. A job that
    raises contributes its exception instead of a result. With workers <= 1 the
    jobs run inline in the calling process.
    """
    if workers <= 1:
        return [_capture(fn, job) for job in jobs]

    loop = asyncio.get_running_loop()
    pool = ProcessPoolExecutor(max_workers=workers)
    futures = [loop.run_in_executor(pool, fn, *job) for job in jobs]
    try:
        results = await asyncio.wait_for(asyncio.gather(*futures, return_exceptions=True), timeout=timeout)
    except asyncio.TimeoutError as exc:
        _stop_workers(pool)
        raise TimeoutError(f"{len(jobs)} jobs timed out after {timeout} seconds") from exc
    pool.shutdown(wait=True)
    logger.debug(f"{len(jobs)} jobs finished on {workers} workers")
    return list(results)
