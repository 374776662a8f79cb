"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox generator keyed by
``(root_seed, *stream_keys)``.  A Monte Carlo budget is cut into fixed-size
chunks and chunk ``k`` always uses stream key ``k``, so the samples belonging
to a chunk do not depend on how many workers process the budget.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

#: Samples per stream chunk; part of the reproducibility contract.
CHUNK_SIZE = 8192


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for ``seed`` and the substream path ``keys``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def chunks(total: int, chunk_size: int = CHUNK_SIZE):
    """Yield ``(index, size)`` for the fixed chunk partition of ``total`` samples."""
    if total < 0:
        raise ValueError("sample count must be non-negative")
    index = 0
    start = 0
    while start < total:
        size = min(chunk_size, total - start)
        yield index, size
        index += 1
        start += size


def derive(seed: int, *keys: int) -> int:
    """A 64-bit child seed for the substream path ``keys``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])
