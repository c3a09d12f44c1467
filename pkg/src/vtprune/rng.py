"""Deterministic random number generation built on SplitMix64.

Every random draw in this package comes from SplitMix64, a fixed, named
64-bit generator (state advances by the golden-gamma constant, outputs are
a bijective bit mix of the state).  The implementation below is pure
integer arithmetic, so identical seeds give bit-identical streams on every
platform and every numpy version.  Bulk draws are vectorised: the state
after n draws is ``seed + n * GAMMA (mod 2**64)``, so a whole block of
outputs can be produced from an arange of states without changing the
stream.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# float in [0, 1) from the top 53 bits of a uint64
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *tags: int) -> int:
    """Derive an independent child seed from a root seed and integer tags.

    Used to give every (video, scene, location, purpose) its own substream
    so that local redraws never shift draws consumed elsewhere.
    """
    state = seed & _MASK
    for tag in tags:
        state = _mix((state + _GAMMA) & _MASK) ^ _mix((tag ^ _GAMMA) & _MASK)
        state &= _MASK
    return state


class SplitMix64:
    """SplitMix64 stream with scalar and vectorised draw paths."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uint64(self, n: int) -> np.ndarray:
        """Draw n raw 64-bit outputs (vectorised, stream-equivalent to n scalar draws)."""
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        start = np.uint64(self._state)
        idx = np.arange(1, n + 1, dtype=np.uint64)
        z = start + np.uint64(_GAMMA) * idx
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GAMMA) & _MASK
        return z

    def uniform(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """n float64 uniforms in [lo, hi) from the top 53 bits of each output."""
        u = (self.uint64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return lo + u * (hi - lo)

    def normal(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller (float64, fully deterministic)."""
        m = (n + 1) // 2
        # u1 in (0, 1] so log never sees zero
        u1 = ((self.uint64(m) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (self.uint64(m) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers in [0, bound) by modular reduction (bound << 2**64, bias negligible and deterministic)."""
        return (self.uint64(n) % np.uint64(bound)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting random keys (ties broken by index)."""
        keys = self.uint64(n)
        return np.lexsort((np.arange(n), keys)).astype(np.int64)
