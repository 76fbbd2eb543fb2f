"""Deterministic hashing and PRNG primitives.

FNV-1a seeds token vectors from token bytes; splitmix64 expands a seed
into a reproducible value stream. Both are fixed-width 64-bit algorithms,
so outputs are identical across platforms and Python builds.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

FNV1A64_BASIS = 14695981039346656037
FNV1A64_PRIME = 1099511628211

_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_MIX1 = 0xBF58476D1CE4E5B9
_SM64_MIX2 = 0x94D049BB133111EB


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash: xor each byte into the state, then multiply."""
    h = FNV1A64_BASIS
    for b in data:
        h ^= b
        h = (h * FNV1A64_PRIME) & _MASK64
    return h


class SplitMix64:
    """Stateful splitmix64 stream.

    State advances by the golden-ratio gamma per draw; the output is a
    mixed copy of the advanced state.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next(self) -> int:
        self._state = (self._state + _SM64_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _SM64_MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM64_MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_unit_interval(self) -> float:
        """Next value mapped to [-1, 1) using the top 53 bits."""
        return (self.next() >> 11) * 2.0**-52 - 1.0


def splitmix64_block(seed: int, n: int) -> np.ndarray:
    """First ``n`` splitmix64 outputs for ``seed``, as a uint64 array.

    Vectorized equivalent of ``SplitMix64(seed).next()`` called ``n`` times.
    """
    with np.errstate(over="ignore"):
        idx = np.arange(1, n + 1, dtype=np.uint64)
        z = (np.uint64(seed) + idx * np.uint64(_SM64_GAMMA)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_SM64_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_SM64_MIX2)
        return z ^ (z >> np.uint64(31))


def uniform_block(seed: int, n: int) -> np.ndarray:
    """First ``n`` splitmix64 draws mapped to [-1, 1) as float64."""
    u = splitmix64_block(seed, n)
    return (u >> np.uint64(11)).astype(np.float64) * 2.0**-52 - 1.0
