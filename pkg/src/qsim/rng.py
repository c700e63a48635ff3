"""Reproducible random streams and the trajectory-ensemble runner.

Stream derivation
-----------------
Trajectory ``i`` of a run with master seed ``s`` draws from a PCG64
generator seeded by ``numpy.random.SeedSequence(s, spawn_key=(i,))``. This
is the same state that ``SeedSequence(s).spawn(...)`` gives its ``i``-th
child, it is fixed by NumPy's documented hashing and it depends only on
``(s, i)``, so results do not depend on how trajectories are distributed
over threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def stream_seed(seed: int, index: int) -> np.random.SeedSequence:
    if seed < 0 or index < 0:
        raise ValueError("seed and trajectory index must be non-negative")
    return np.random.SeedSequence(int(seed), spawn_key=(int(index),))


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of master seed ``seed``."""
    return np.random.Generator(np.random.PCG64(stream_seed(seed, index)))


def default_threads() -> int:
    value = os.environ.get("QSIM_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return 1


def pairwise_sum(arrays):
    """Sum a sequence of equally shaped arrays in a fixed binary-tree order."""
    arrays = list(arrays)
    if not arrays:
        raise ValueError("nothing to sum")
    while len(arrays) > 1:
        nxt = [arrays[k] + arrays[k + 1] for k in range(0, len(arrays) - 1, 2)]
        if len(arrays) % 2:
            nxt.append(arrays[-1])
        arrays = nxt
    return arrays[0]


def pairwise_mean(arrays):
    arrays = list(arrays)
    return pairwise_sum(arrays) / len(arrays)


def run_ensemble(simulate_one, ntraj: int, seed: int, n_threads: int | None = None):
    """Run ``simulate_one(i, rng)`` for ``i = 0 .. ntraj-1``.

    Results come back in trajectory order. Exceptions raised by a trajectory
    are returned in its slot rather than propagated, so callers can decide
    how to treat partial failures.
    """
    if ntraj < 1:
        raise ValueError("ntraj must be >= 1")
    n_threads = n_threads or default_threads()

    def task(i):
        try:
            return simulate_one(i, stream(seed, i))
        except Exception as exc:  # noqa: BLE001 - recorded per trajectory
            return exc

    if n_threads == 1:
        return [task(i) for i in range(ntraj)]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(task, range(ntraj)))


def run_batched(simulate_batch, ntraj: int, seed: int, n_threads: int | None = None,
                batch_size: int = 32):
    """Run trajectories in fixed-size batches.

    ``simulate_batch(indices, rngs)`` receives consecutive trajectory indices
    and their generators. Batch boundaries depend only on ``batch_size``,
    never on the thread count, so batched linear algebra sees identical
    operand shapes whatever the parallelism.
    """
    if ntraj < 1:
        raise ValueError("ntraj must be >= 1")
    n_threads = n_threads or default_threads()
    batches = [list(range(k, min(k + batch_size, ntraj))) for k in range(0, ntraj, batch_size)]

    def task(idx):
        return simulate_batch(idx, [stream(seed, i) for i in idx])

    if n_threads == 1:
        return [task(b) for b in batches]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(task, batches))
