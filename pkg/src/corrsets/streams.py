"""Counter-based Gaussian streams.

Every random number in the package comes from :func:`normals`, addressed by
``(seed, key, row)``. The key is a tuple of small integers (purpose tag,
probability-level index, trajectory index, ...) hashed into a Philox key via
``numpy.random.SeedSequence``; the row is the step index and maps to a fixed
counter offset. A row therefore always yields the same numbers no matter how
many rows were drawn before it, in which order trajectories are generated, or
how many workers generate them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

DISTURBANCE = 0
STATE = 1
AUX = 2

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter step


def philox(seed, key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Philox(key=ss.generate_state(2, np.uint64))


def normals(seed, key, rows, width, start=0):
    """Standard normals of shape ``(rows, width)`` for rows ``start, start+1, ...``."""
    blocks = -(-width // _WORDS_PER_BLOCK)
    bg = philox(seed, key)
    if start:
        bg.advance(start * blocks)
    raw = bg.random_raw(rows * blocks * _WORDS_PER_BLOCK)
    raw = raw.reshape(rows, blocks * _WORDS_PER_BLOCK)[:, :width]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def batch_normals(seed, key, trajectories, rows, width, jobs=1):
    """Stack :func:`normals` over trajectory indices: shape ``(N, rows, width)``.

    ``jobs > 1`` fills disjoint slices from a thread pool; the output does not
    depend on ``jobs``.
    """
    trajectories = list(trajectories)
    out = np.empty((len(trajectories), rows, width))

    def fill(lo, hi):
        for i in range(lo, hi):
            out[i] = normals(seed, (*key, trajectories[i]), rows, width)

    for_chunks(len(trajectories), jobs, fill)
    return out


def for_chunks(count, jobs, fn):
    """Call ``fn(lo, hi)`` over a partition of ``range(count)``, possibly in threads."""
    jobs = max(1, int(jobs or 1))
    if jobs == 1 or count < 2:
        fn(0, count)
        return
    edges = np.linspace(0, count, min(jobs, count) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
        for f in futures:
            f.result()
