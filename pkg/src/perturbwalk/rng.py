"""Counter-based, splittable random streams.

Every random number is a pure function of a 64-bit stream key and a 64-bit
counter, so any draw can be regenerated in isolation and replicates can be
executed in any order (or in any number of worker processes) without
changing a single bit of output.

Keys are derived hierarchically::

    key = derive_key(master_seed, experiment_index, replicate, family_tag)

and each increment ``i`` of a stream owns the counter block
``[i << ATTEMPT_BITS, (i + 1) << ATTEMPT_BITS)``; samplers that need several
uniforms (rejection loops) walk through the block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)

ATTEMPT_BITS = 20
MAX_ATTEMPTS = 1 << ATTEMPT_BITS
_SHIFT = np.uint64(ATTEMPT_BITS)
_INV53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


@njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always", cache=True)
def combine(key, tag):
    return mix64(key ^ mix64(tag + GOLDEN))


@njit(inline="always", cache=True)
def draw_u64(key, ctr):
    # explicit casts: an int64 counter would otherwise promote to float64
    key = np.uint64(key)
    ctr = np.uint64(ctr)
    return mix64(mix64(key + GOLDEN * (ctr + _ONE)) ^ key)


@njit(inline="always", cache=True)
def block_counter(index, attempt):
    return (np.uint64(index) << _SHIFT) | np.uint64(attempt)


@njit(inline="always", cache=True)
def u01_open_right(u):
    """[0, 1) with 53-bit resolution."""
    return float(u >> _S11) * _INV53


@njit(inline="always", cache=True)
def u01_open_left(u):
    """(0, 1] with 53-bit resolution."""
    return float((u >> _S11) + _ONE) * _INV53


# Python-side mirrors (arbitrary precision ints, masked to 64 bits).

def _mix64_py(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _combine_py(key: int, tag: int) -> int:
    return _mix64_py(key ^ _mix64_py((tag + 0x9E3779B97F4A7C15) & MASK64))


def derive_key(*parts: int) -> int:
    """Fold integer tags into a 64-bit key. Negative tags are allowed."""
    key = 0x6A09E667F3BCC908
    for p in parts:
        key = _combine_py(key, int(p) & MASK64)
    return key


@dataclass
class Stream:
    """A cursor over one counter-based stream.

    ``index`` is the number of increments already drawn from the stream.
    """

    key: int
    index: int = 0

    @classmethod
    def from_tags(cls, *tags: int) -> "Stream":
        return cls(derive_key(*tags))

    def u64(self, attempt: int = 0) -> int:
        return int(draw_u64(np.uint64(self.key), np.uint64((self.index << ATTEMPT_BITS) | attempt)))
