"""BLAS thread control.

The solves in this package are small (grids of a few hundred points), where
multithreaded BLAS oversubscription costs far more than it saves.  Entry
points cap BLAS pools at one thread; callers embedding the library can do
the same around hot loops.
"""

from __future__ import annotations


def limit_blas_threads(n: int = 1):
    """Cap BLAS thread pools; returns the controller (or None if unavailable)."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - threadpoolctl ships with scipy stacks
        return None
    return threadpool_limits(limits=n, user_api="blas")
