"""Seeded model families: SK, diluted SK on random regular graphs, Curie-Weiss.

All couplings are exactly symmetric with exactly zero diagonal. Upper
triangle entries are filled in row-major order (i < j) from the stream.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, GraphGenerationError
from .model import IsingModel, canonicalize
from .rng import SeededRng

MAX_PAIRING_ATTEMPTS = 1000


def _fill_upper(n: int, values: np.ndarray) -> np.ndarray:
    J = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    J[iu] = values
    return J + J.T


def sk_model(n: int, beta: float, rng: SeededRng) -> IsingModel:
    """J_ij ~ N(0, beta^2/n) for i < j, symmetric, zero diagonal, h = 0."""
    if n < 2:
        raise DimensionError("SK model needs n >= 2")
    if not beta > 0:
        raise ValueError("beta must be positive")
    z = rng.normal(n * (n - 1) // 2)
    return IsingModel(_fill_upper(n, z * (beta / np.sqrt(n))), np.zeros(n))


def random_regular_graph(n: int, d: int, rng: SeededRng) -> list[tuple[int, int]]:
    """Pairing-model d-regular simple graph, rejecting loops and multi-edges."""
    if (n * d) % 2:
        raise DimensionError("n * d must be even")
    if not 0 < d < n:
        raise DimensionError("need 0 < d < n")
    stubs = np.repeat(np.arange(n), d)
    for _ in range(MAX_PAIRING_ATTEMPTS):
        perm = rng.permutation(stubs)
        a, b = perm[0::2], perm[1::2]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        if len(np.unique(keys)) != len(keys):
            continue
        return sorted(zip(lo.tolist(), hi.tolist()))
    raise GraphGenerationError(
        f"no simple {d}-regular graph on {n} vertices after {MAX_PAIRING_ATTEMPTS} pairings"
    )


def diluted_sk(n: int, d: int, beta: float, rng: SeededRng) -> IsingModel:
    """J_ij = +-beta with equal probability on the edges of a random d-regular graph."""
    if d < 3:
        raise DimensionError("diluted SK needs d >= 3")
    if not beta > 0:
        raise ValueError("beta must be positive")
    edges = random_regular_graph(n, d, rng)
    signs = np.where(rng.uniform(len(edges)) < 0.5, beta, -beta)
    J = np.zeros((n, n))
    for (i, j), s in zip(edges, signs):
        J[i, j] = J[j, i] = s
    deg = np.count_nonzero(J, axis=1)
    if np.any(deg != d) or np.any(np.diag(J) != 0):
        raise GraphGenerationError("generated support is not a simple d-regular graph")
    return IsingModel(J, np.zeros(n))


def curie_weiss(n: int, beta: float, h0: float = 0.0) -> IsingModel:
    if n < 1:
        raise DimensionError("n must be positive")
    J = np.full((n, n), beta / n)
    np.fill_diagonal(J, 0.0)
    return IsingModel(J, np.full(n, float(h0)))


def random_spread_model(n: int, spread: float, rng: SeededRng, field_scale: float = 0.5) -> IsingModel:
    """Gaussian zero-diagonal couplings rescaled so lambda_max - lambda_min == spread.

    The field is Gaussian with standard deviation ``field_scale``. Used by the
    experiment recipes and the acceptance sweeps.
    """
    if n < 2:
        raise DimensionError("need n >= 2 to set a spread")
    G = _fill_upper(n, rng.normal(n * (n - 1) // 2))
    h = rng.normal(n) * field_scale
    res = canonicalize(IsingModel(G, np.zeros(n)))
    return IsingModel(G * (spread / res.spread), h)


def random_psd_model(n: int, spread: float, rng: SeededRng, field_scale: float = 0.5) -> IsingModel:
    """Canonical (psd, smallest eigenvalue 0) version of :func:`random_spread_model`."""
    return canonicalize(random_spread_model(n, spread, rng, field_scale)).model
