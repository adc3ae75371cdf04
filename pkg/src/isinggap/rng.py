"""Seeded, splittable random streams.

Base generator: numpy ``PCG64`` seeded by ``SeedSequence(seed, spawn_key=(stream,))``.
Uniforms are ``Generator.random()`` doubles (53-bit, in [0, 1)).

Normals are produced from uniforms with the basic Box-Muller transform, so
that anyone holding the same uniform stream can reproduce them::

    u1 = 1 - U[2k], u2 = U[2k+1]            (u1 in (0, 1])
    r = sqrt(-2 log u1)
    Z[2k] = r cos(2 pi u2), Z[2k+1] = r sin(2 pi u2)

For an odd count the last sine is discarded.

Child streams: ``child(k)`` keeps the seed and replaces the stream by
``splitmix64(stream * 0x9E3779B97F4A7C15 + k + 1)`` (arithmetic mod 2^64).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


@dataclass
class SeededRng:
    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK
        self.stream = int(self.stream) & _MASK
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "SeededRng":
        return SeededRng(self.seed, splitmix64((self.stream * _GOLDEN + int(k) + 1) & _MASK))

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size) -> np.ndarray:
        size = int(size)
        m = (size + 1) // 2
        u = self._gen.random(2 * m)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:size]

    def integers(self, high: int, size) -> np.ndarray:
        """Uniform integers in [0, high) as ``floor(U * high)``."""
        return np.minimum((self._gen.random(size) * high).astype(np.int64), high - 1)

    def poisson(self, lam: float, size=None):
        # numpy's PCG64-driven Poisson sampler; part of the reproducibility contract
        return self._gen.poisson(lam, size)

    def permutation(self, items: np.ndarray) -> np.ndarray:
        """Fisher-Yates shuffle driven by uniforms: j = floor(U * (i + 1)), i = N-1..1."""
        out = np.array(items, copy=True)
        N = len(out)
        if N < 2:
            return out
        u = self._gen.random(N - 1)
        js = (u * np.arange(N, 1, -1)).astype(np.int64)
        for i, j in zip(range(N - 1, 0, -1), js):
            out[i], out[j] = out[j], out[i]
        return out
