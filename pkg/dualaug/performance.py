"""
Performance Utilities
=====================

Thread pinning for reproducible numerics, parallel fan-out of independent
runs, and phase timing.
"""

import os
import time
from typing import Any, Callable, List, Optional
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
import multiprocessing as mp
import logging

import torch

logger = logging.getLogger(__name__)

THREAD_VARIABLES = (
    'OMP_NUM_THREADS',
    'OPENBLAS_NUM_THREADS',
    'MKL_NUM_THREADS',
    'VECLIB_MAXIMUM_THREADS',
    'NUMEXPR_NUM_THREADS',
)


def configure_threads(n_threads: int = 1):
    """
    Pin BLAS/OpenMP and torch to ``n_threads``.

    A single thread makes parameter trajectories bit-reproducible.
    """
    for name in THREAD_VARIABLES:
        os.environ[name] = str(n_threads)
    torch.set_num_threads(n_threads)
    logger.debug(f"Numeric thread count set to {n_threads}")


def parallel_map(
    func: Callable,
    items: List[Any],
    n_workers: Optional[int] = None,
    use_processes: bool = False
) -> List[Any]:
    """
    Apply function to items in parallel, preserving order.

    Args:
        func: Function to apply (must be picklable with processes)
        items: List of items to process
        n_workers: Number of workers (None = CPU count, 1 = sequential)
        use_processes: Use processes instead of threads

    Returns:
        List of results
    """
    if n_workers is None:
        n_workers = mp.cpu_count()
    if n_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    executor_class = ProcessPoolExecutor if use_processes else ThreadPoolExecutor
    with executor_class(max_workers=n_workers) as executor:
        return list(executor.map(func, items))


class PerformanceMonitor:
    """Monitor and log performance metrics."""

    def __init__(self):
        """Initialize performance monitor."""
        self.metrics = {}
        self.start_times = {}

    def start(self, name: str):
        """
        Start timing an operation.

        Args:
            name: Operation name
        """
        self.start_times[name] = time.perf_counter()

    def end(self, name: str):
        """
        End timing an operation and record metric.

        Args:
            name: Operation name
        """
        if name not in self.start_times:
            logger.warning(f"No start time for operation: {name}")
            return

        elapsed = time.perf_counter() - self.start_times.pop(name)
        self.metrics.setdefault(name, []).append(elapsed)
        logger.debug(f"Operation '{name}' took {elapsed:.3f}s")

    def get_stats(self, name: str) -> dict:
        """
        Get statistics for an operation.

        Args:
            name: Operation name

        Returns:
            Statistics dictionary
        """
        if name not in self.metrics or not self.metrics[name]:
            return {}

        times = self.metrics[name]
        return {
            'count': len(times),
            'total': sum(times),
            'mean': sum(times) / len(times),
            'min': min(times),
            'max': max(times)
        }

    def get_all_stats(self) -> dict:
        """Get statistics for all operations."""
        return {name: self.get_stats(name) for name in self.metrics.keys()}
