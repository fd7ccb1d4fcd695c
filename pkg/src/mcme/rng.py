"""Portable seeded random numbers.

SplitMix64 on an integer state, 53-bit uniforms taken from the top bits and
Box-Muller normals (cosine branch only). Every draw goes through uint64
arithmetic and IEEE double operations in a fixed order, so a seed produces the
same stream on any platform with a conforming libm.
"""

import hashlib
import math

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *keys) -> int:
    """Combine a base seed with arbitrary keys into a new 64-bit seed.

    Uses blake2b so the result does not depend on Python's hash randomization.
    """
    h = hashlib.blake2b(repr(keys).encode(), digest_size=8)
    return (int(seed) ^ int.from_bytes(h.digest(), "little")) & _MASK


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` 64-bit outputs as a uint64 array."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * _GAMMA
            out = _mix(z)
        self.state = (self.state + n * int(_GAMMA)) & _MASK
        return out

    def uniform(self, size=None, low=0.0, high=1.0):
        """Uniform doubles in [low, high)."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        u = low + (high - low) * u
        return float(u[0]) if size is None else u.reshape(size)

    def normal(self, size=None, scale=1.0):
        n = 1 if size is None else int(np.prod(size))
        u = self.uniform(2 * n).reshape(2, n)
        z = np.sqrt(-2.0 * np.log1p(-u[0])) * np.cos(2.0 * math.pi * u[1])
        z = scale * z
        return float(z[0]) if size is None else z.reshape(size)

    def integers(self, high: int, size=None):
        """Integers in [0, high) via the multiply-shift map."""
        n = 1 if size is None else int(np.prod(size))
        vals = [(x * high) >> 64 for x in self.raw(n).tolist()]
        if size is None:
            return vals[0]
        return np.array(vals, dtype=np.int64).reshape(size)

    def sample(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from range(n) (partial Fisher-Yates)."""
        if k > n:
            raise ValueError("cannot sample more items than the population")
        swapped = {}
        out = []
        for i, x in enumerate(self.raw(k).tolist()):
            j = i + ((x * (n - i)) >> 64)
            vi, vj = swapped.get(i, i), swapped.get(j, j)
            swapped[j] = vi
            out.append(vj)
        return np.array(out, dtype=np.int64)

    def unit_vectors(self, n: int, dim: int) -> np.ndarray:
        """Rows uniform on the unit sphere in R^dim."""
        v = self.normal((n, dim))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        bad = norms[:, 0] < 1e-12
        while np.any(bad):
            v[bad] = self.normal((int(bad.sum()), dim))
            norms = np.linalg.norm(v, axis=1, keepdims=True)
            bad = norms[:, 0] < 1e-12
        return v / norms
