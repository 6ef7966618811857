"""Counter-based random streams for reproducible Monte Carlo.

Every trajectory draws from its own substream, a pure function of
``(master_seed, trajectory_index, draw_counter)`` built on the splitmix64
finalizer.  Because draws are stateless in the counter, the Python,
vectorized-numpy and numba implementations produce bit-identical
sequences, and results cannot depend on scheduling or worker count.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on 64-bit integers."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def stream_key(master_seed: int, index: int) -> int:
    """Derive the 64-bit key of substream ``index``."""
    return mix64(mix64(master_seed & _MASK) ^ mix64((GOLDEN * (index + 1)) & _MASK))


def draw_u64(key: int, counter: int) -> int:
    """Raw 64-bit draw number ``counter`` of the given substream."""
    return mix64((key + GOLDEN * counter) & _MASK)


def to_unit(bits: int) -> float:
    """Map 64 random bits to a double strictly inside (0, 1)."""
    return ((bits >> 11) + 0.5) * 2.0**-53


class CounterStream:
    """Stateful view of one substream; used by the Python trajectory path."""

    def __init__(self, master_seed: int, index: int = 0):
        self.key = stream_key(master_seed, index)
        self.counter = 0

    def uniform(self) -> float:
        u = to_unit(draw_u64(self.key, self.counter))
        self.counter += 1
        return u
