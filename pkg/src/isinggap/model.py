"""Ising models on {-1, +1}^n and the hypercube state encoding.

States are integers in ``[0, 2^n)``; bit ``i`` set means ``x_i = -1``, so index
0 is the all-plus configuration. The measure of a model is

    nu(x) proportional to exp(0.5 <x, J x> + <h, x>)

against the uniform measure. Diagonal entries of ``J`` only shift the
log-partition function.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DimensionError, ModelFormatError

SYMMETRY_TOL = 1e-12


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IsingModel:
    J: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        J = np.array(self.J, dtype=np.float64)
        h = np.array(self.h, dtype=np.float64).reshape(-1)
        n = h.shape[0]
        if n < 1:
            raise DimensionError("need at least one spin")
        if J.shape != (n, n):
            raise DimensionError(f"J has shape {J.shape}, expected ({n}, {n})")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(h))):
            raise ModelFormatError("J and h must be finite")
        asym = float(np.max(np.abs(J - J.T))) if n > 1 else 0.0
        if asym > SYMMETRY_TOL:
            raise ModelFormatError(f"J is not symmetric (max |J - J^T| = {asym:.3g})")
        J = np.triu(J) + np.triu(J, 1).T
        object.__setattr__(self, "J", _readonly(J))
        object.__setattr__(self, "h", _readonly(h))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def zero_diagonal(self) -> np.ndarray:
        J = np.array(self.J)
        np.fill_diagonal(J, 0.0)
        return J

    def __eq__(self, other):
        if not isinstance(other, IsingModel):
            return NotImplemented
        return np.array_equal(self.J, other.J) and np.array_equal(self.h, other.h)

    def __hash__(self):
        return hash((self.J.tobytes(), self.h.tobytes()))


@dataclass(frozen=True)
class RankOnePair:
    """Parameters of the measure exp(0.5 <u, x>^2 + <v, x>) / Z."""

    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class CanonicalizationResult:
    model: IsingModel
    lambda_min: float
    lambda_max: float
    gamma: float

    @property
    def spread(self) -> float:
        return self.lambda_max - self.lambda_min


def encode(x) -> int:
    """Map a +-1 vector to its state index."""
    k = 0
    for i, xi in enumerate(x):
        if xi == -1:
            k |= 1 << i
        elif xi != 1:
            raise ValueError(f"spin {i} is {xi}, expected +-1")
    return k


def decode(k: int, n: int) -> np.ndarray:
    if not 0 <= k < (1 << n):
        raise ValueError(f"state {k} out of range for n={n}")
    return 1 - 2 * ((int(k) >> np.arange(n)) & 1)


def spins(n: int) -> np.ndarray:
    """All 2^n states as a (2^n, n) float array of +-1, row k = decode(k)."""
    idx = np.arange(1 << n)
    return 1.0 - 2.0 * ((idx[:, None] >> np.arange(n)) & 1)


def _as_spins(model: IsingModel, x) -> np.ndarray:
    if np.isscalar(x) or isinstance(x, (int, np.integer)):
        return decode(int(x), model.n).astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise DimensionError(f"state has shape {x.shape}, expected ({model.n},)")
    return x


def energy(model: IsingModel, x) -> float:
    """0.5 <x, Jx> + <h, x> for a state index or a +-1 vector."""
    xs = _as_spins(model, x)
    return float(0.5 * xs @ model.J @ xs + model.h @ xs)


def local_field(model: IsingModel, x, i: int) -> float:
    if not 0 <= i < model.n:
        raise IndexError(f"site {i} out of range for n={model.n}")
    xs = _as_spins(model, x)
    return float(model.J[i] @ xs - model.J[i, i] * xs[i] + model.h[i])


def conditional_mean(model: IsingModel, x, i: int) -> float:
    """E[X_i | X_{~i} = x_{~i}] = tanh(sum_{j != i} J_ij x_j + h_i)."""
    return math.tanh(local_field(model, x, i))


def canonicalize(model: IsingModel) -> CanonicalizationResult:
    """Zero the diagonal and shift by the smallest eigenvalue.

    The result has the same Gibbs measure, a positive semidefinite coupling
    matrix with smallest eigenvalue 0, and certificate
    ``gamma = 1 - (lambda_max - lambda_min)``.
    """
    J0 = model.zero_diagonal()
    lo, hi = linalg.extreme_eigenvalues(J0)
    Jc = J0 - lo * np.eye(model.n)
    return CanonicalizationResult(IsingModel(Jc, model.h), lo, hi, 1.0 - (hi - lo))


def rank_one_model(pair: RankOnePair) -> IsingModel:
    u = np.asarray(pair.u, dtype=np.float64)
    v = np.asarray(pair.v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError("u and v must be vectors of equal length")
    return IsingModel(np.outer(u, u), v)


# -- JSON file format -------------------------------------------------------

def _reject_constant(name):
    raise ModelFormatError(f"non-finite number {name} in model file")


def model_to_dict(model: IsingModel) -> dict:
    return {"n": model.n, "J": model.J.reshape(-1).tolist(), "h": model.h.tolist()}


def model_from_dict(d: dict) -> IsingModel:
    try:
        n = d["n"]
        J = d["J"]
        h = d["h"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"model is missing field {exc}") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ModelFormatError("'n' must be a positive integer")
    if not isinstance(J, list) or len(J) != n * n:
        raise ModelFormatError(f"'J' must be a list of n^2 = {n * n} numbers")
    if not isinstance(h, list) or len(h) != n:
        raise ModelFormatError(f"'h' must be a list of {n} numbers")
    for val in (*J, *h):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ModelFormatError(f"non-numeric entry {val!r}")
    return IsingModel(np.array(J, dtype=np.float64).reshape(n, n), np.array(h, dtype=np.float64))


def loads_model(text: str) -> IsingModel:
    try:
        d = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}") from None
    return model_from_dict(d)


def load_model(path) -> IsingModel:
    return loads_model(Path(path).read_text())


def dumps_model(model: IsingModel, extra: dict | None = None) -> str:
    d = model_to_dict(model)
    if extra:
        d.update(extra)
    return json.dumps(d, indent=1, sort_keys=False)


def save_model(model: IsingModel, path, extra: dict | None = None) -> None:
    Path(path).write_text(dumps_model(model, extra) + "\n")
