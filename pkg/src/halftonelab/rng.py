"""Deterministic counter-based random number generation.

Every random quantity in this package is derived from a 64-bit seed through
the SplitMix64 mixing function, evaluated at explicit counter values.  The
same (seed, counter) pair yields the same output on every platform, which
makes noise maps, sampled halftones and training runs bit-reproducible.

Generator specification (also in the README):

    state(i)  = (seed + (i + 1) * 0x9E3779B97F4A7C15) mod 2^64
    mix(x):     x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9  (mod 2^64)
                x ^= x >> 27;  x *= 0x94D049BB133111EB  (mod 2^64)
                x ^= x >> 31
    word(i)   = mix(state(i))
    u01(i)    = ((word(i) >> 11) + 1) * 2^-53          in (0, 1]
    normals:    Box-Muller on consecutive pairs (u01(2k), u01(2k+1)):
                z0 = sqrt(-2 ln u1) cos(2 pi u2)
                z1 = sqrt(-2 ln u1) sin(2 pi u2)

Sub-streams are derived by hashing a tuple of integers into a new seed with
the same mixing function, so independent uses never share counters.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix(x: np.ndarray) -> np.ndarray:
    # uint64 arithmetic is modular by design; silence scalar overflow noise
    with np.errstate(over="ignore"):
        x = x ^ (x >> _U64(30))
        x = x * _MIX1
        x = x ^ (x >> _U64(27))
        x = x * _MIX2
        x = x ^ (x >> _U64(31))
    return x


def _words(seed: int, start: int, count: int) -> np.ndarray:
    """Raw uint64 outputs for counters start .. start+count-1."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = _U64(seed & 0xFFFFFFFFFFFFFFFF) + (idx + _U64(1)) * _GOLDEN
    return _mix(state)


def derive_seed(*parts: int) -> int:
    """Hash a tuple of integers into a new 64-bit seed.

    Used to split one run seed into independent sub-streams (noise maps,
    Bernoulli sampling, crop positions, ...).  Order-sensitive.
    """
    acc = _U64(0x243F6A8885A308D3)  # pi fractional bits, arbitrary nonzero
    with np.errstate(over="ignore"):
        for p in parts:
            acc = _mix(acc ^ _U64(p & 0xFFFFFFFFFFFFFFFF))
            acc = acc * _GOLDEN + _U64(1)
    return int(_mix(acc))


class Stream:
    """Stateful view over the counter sequence of one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._next = 0

    def _take(self, count: int) -> np.ndarray:
        w = _words(self.seed, self._next, count)
        self._next += count
        return w

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in (0, 1], shape (count,)."""
        w = self._take(count)
        return ((w >> _U64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        """Standard normal doubles via Box-Muller, shape (count,)."""
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = r * np.cos(ang)
        z[1::2] = r * np.sin(ang)
        return z[:count]

    def integers(self, count: int, bound: int) -> np.ndarray:
        """Integers in [0, bound) by multiply-shift on the top 53 bits."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        u = self.uniform(count) - 2.0**-53  # back to [0, 1)
        return np.minimum((u * bound).astype(np.int64), bound - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Permutation of range(n): argsort of n fresh uniform keys."""
        return np.argsort(self.uniform(n), kind="stable")

    def split(self, *parts: int) -> "Stream":
        """Independent sub-stream keyed by (this seed, *parts)."""
        return Stream(derive_seed(self.seed, *parts))
