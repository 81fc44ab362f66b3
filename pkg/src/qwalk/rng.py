"""Per-trajectory random streams derived from one master seed.

Trajectory ``i`` always gets the same stream no matter which worker runs it,
so ensemble results do not depend on the parallel schedule.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(master_seed: int, index: int) -> int:
    """SplitMix64 finalizer applied to ``master_seed + (index + 1) * golden``."""
    z = (int(master_seed) + (int(index) + 1) * _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based (Philox) generator owned by trajectory ``index``."""
    return np.random.Generator(np.random.Philox(key=mix64(master_seed, index)))
