"""Deterministic seed derivation for parallel work.

Every replication, bootstrap draw, or Monte Carlo chunk gets its own child
seed from a fixed 64-bit mixing function of (seed, index), so results are
identical no matter how the work is scheduled.
"""

from __future__ import annotations

import numpy as np

__all__ = ["mix_seed", "child_rng"]

_MASK = (1 << 64) - 1


def mix_seed(seed: int, index: int) -> int:
    """Mix a base seed with a task index into an independent 64-bit seed.

    splitmix64 finalizer applied to seed + golden-ratio increments of the
    index; avalanche ensures adjacent indices share no statistical structure.
    """
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def child_rng(seed: int, index: int) -> np.random.Generator:
    """Generator seeded from mix_seed(seed, index)."""
    return np.random.Generator(np.random.PCG64(mix_seed(seed, index)))
