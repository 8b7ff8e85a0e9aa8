"""
Counter-based random streams.

Every stochastic routine derives its generator from ``(seed, stream, index)``
so that results do not depend on the order in which replicas, draw blocks or
worker threads are processed.
"""

from enum import IntEnum

import numpy as np

_MASK64 = (1 << 64) - 1


class Stream(IntEnum):
    """Disjoint stream identifiers; one per consumer of randomness."""

    PATHS = 1
    DIRECTIONS = 2
    REFERENCE = 3
    PERMUTATION = 4
    WINDOWS = 5
    OSD = 6
    NU = 7
    LEVY = 8


def derive_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """
    Return a Philox generator for ``(seed, stream, index)``.

    The seed is the 64-bit Philox key; the two high counter words carry the
    stream id and the index, so distinct pairs never share random numbers
    before 2**128 draws.
    """
    counter = np.array([0, 0, int(stream) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64, counter=counter))
