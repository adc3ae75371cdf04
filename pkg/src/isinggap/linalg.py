"""Symmetric eigensolvers.

Small matrices (n <= 64) go through cyclic Jacobi rotations from the kernel
backend; larger ones use LAPACK via numpy.
"""
import numpy as np

from . import _backend
from .errors import EigenSolverError

JACOBI_MAX_N = 64
JACOBI_TOL = 1e-14


def eigh(A):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``A``."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    if n > JACOBI_MAX_N:
        return np.linalg.eigh(A)
    w, V, sweeps, off = _backend.jacobi_eigh(A, JACOBI_TOL)
    fro = float(np.linalg.norm(A))
    if off > 1e3 * JACOBI_TOL * max(fro, 1e-300):
        raise EigenSolverError(
            f"Jacobi did not converge after {sweeps} sweeps", residual=off / max(fro, 1e-300)
        )
    return w, V


def eigvalsh(A):
    return eigh(A)[0]


def extreme_eigenvalues(A):
    w = eigvalsh(A)
    return float(w[0]), float(w[-1])


def opnorm(A):
    """Largest absolute eigenvalue of a symmetric matrix."""
    w = eigvalsh(A)
    return float(max(abs(w[0]), abs(w[-1]))) if len(w) else 0.0
