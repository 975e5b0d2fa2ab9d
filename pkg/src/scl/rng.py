"""Counter-based random streams.

Every Monte Carlo trial draws from a Philox stream keyed by (seed, trial
index), so results do not depend on how trials are distributed over workers.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, trial) cell."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(trial)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def substreams(seed: int, n: int, offset: int = 0) -> list[np.random.Generator]:
    return [stream(seed, offset + i) for i in range(n)]
