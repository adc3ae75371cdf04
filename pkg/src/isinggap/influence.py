"""l2-Dobrushin influence matrices of Ising models.

A_ij is the largest total-variation change of the conditional law of X_i
when only x_j changes. For +-1 spins the TV distance between two
conditionals is half the difference of their means, so

    A_ij = 1/2 max_s |tanh(s + h_i + J_ij) - tanh(s + h_i - J_ij)|

over the achievable sums s = sum_{k != i, j} J_ik x_k. The 1/2 is the literal
TV reading; the |u_i u_j| bound for rank-one couplings holds either way.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend, linalg
from .errors import CapExceededError
from .model import IsingModel

MAX_INFLUENCE_N = 20
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000


@dataclass
class InfluenceMatrix:
    A: np.ndarray
    opnorm: float
    method: str


def influence_entry(model: IsingModel, i: int, j: int) -> float:
    if i == j:
        return 0.0
    row = model.J[i]
    others = [k for k in range(model.n) if k != i and k != j]
    w = row[others]
    return 0.5 * _backend.influence_max(w, float(model.h[i]), float(row[j]))


def influence_matrix_exact(model: IsingModel) -> InfluenceMatrix:
    n = model.n
    if n > MAX_INFLUENCE_N:
        raise CapExceededError(f"influence_matrix_exact needs n <= {MAX_INFLUENCE_N}")
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and model.J[i, j] != 0.0:
                A[i, j] = influence_entry(model, i, j)
    norm, method = nonnegative_opnorm(A)
    return InfluenceMatrix(A, norm, method)


def nonnegative_opnorm(A, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Spectral norm of a nonnegative matrix by power iteration on A^T A.

    Falls back to an SVD when the iteration stalls (e.g. a reducible A with
    nearly tied Perron roots).
    """
    A = np.asarray(A, dtype=np.float64)
    if not np.any(A):
        return 0.0, "power"
    B = A.T @ A
    x = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(max_iter):
        y = B @ x
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, "power"
        x = y / ny
        if abs(new - lam) <= tol * max(new, 1e-300):
            res = np.linalg.norm(B @ x - float(x @ B @ x) * x)
            if res <= 1e-6 * max(new, 1e-300):
                return float(np.sqrt(float(x @ B @ x))), "power"
        lam = new
    return float(np.linalg.norm(A, 2)), "svd"


def rank_one_factor(model: IsingModel, tol=1e-10):
    """Return u with J == u u^T (diagonal included) if J is psd rank one, else None."""
    w, V = linalg.eigh(model.J)
    scale = max(abs(w[0]), abs(w[-1]), 1e-300)
    if w[-1] <= 0 or np.any(np.abs(w[:-1]) > tol * scale):
        return None
    u = np.sqrt(w[-1]) * V[:, -1]
    if np.max(np.abs(np.outer(u, u) - model.J)) > 1e-9 * scale:
        return None
    return u


def l2_dobrushin_certificate(model: IsingModel) -> dict:
    """||A||_OP and, when it is below 1, the certified gap 1 - ||A||_OP."""
    inf = influence_matrix_exact(model)
    out = {
        "opnorm_A": inf.opnorm,
        "certified_gap": (1.0 - inf.opnorm) if inf.opnorm < 1.0 else None,
        "method": inf.method,
        "max_row_l1_J": float(np.max(np.sum(np.abs(model.zero_diagonal()), axis=1))),
    }
    u = rank_one_factor(model)
    if u is not None:
        out["rank_one_u_norm_sq"] = float(u @ u)
    return out
