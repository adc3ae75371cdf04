"""Exact Gibbs measures over all 2^n states and brute-force Glauber spectra.

Every routine here touches the full hypercube, so sizes are capped.
Conventions: probabilities are indexed by state (see ``model.encode``);
test functions are plain float arrays of length 2^n.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.special import expit, logsumexp

from . import _backend
from .errors import CapExceededError, DimensionError, NumericalError
from .model import IsingModel, canonicalize, energy

MAX_ENUM_N = 24
MAX_DENSE_N = 12
MAX_ITERATIVE_N = 20
GAP_TOL = 1e-9
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ExactDistribution:
    n: int
    log_weights: np.ndarray
    probs: np.ndarray
    log_Z: float


@dataclass
class GapReport:
    gamma_certified: float
    gap_exact: float
    passed: bool
    method: str
    residual: float
    spread: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _check_n(n, cap, what):
    if n > cap:
        raise CapExceededError(f"{what} needs n <= {cap}, got n = {n}")


def distribution_from_log_weights(log_weights) -> ExactDistribution:
    """Normalize unnormalized log-densities (relative to uniform) over 2^n states."""
    lw = np.asarray(log_weights, dtype=np.float64)
    n = int(round(math.log2(lw.shape[0])))
    if lw.shape != (1 << n,):
        raise DimensionError("log-weight vector length must be a power of two")
    log_Z = float(logsumexp(lw)) - n * math.log(2.0)
    probs = np.exp(lw - (log_Z + n * math.log(2.0)))
    return ExactDistribution(n, lw, probs, log_Z)


def enumerate_distribution(model: IsingModel) -> ExactDistribution:
    _check_n(model.n, MAX_ENUM_N, "enumerate_distribution")
    return distribution_from_log_weights(_backend.log_weights(model.J, model.h))


# -- hypercube plumbing -----------------------------------------------------

def _split(v, i, n):
    """View of ``v`` as (high, bit i, low) so that [:, 0, :] / [:, 1, :] are edge ends."""
    return v.reshape(1 << (n - i - 1), 2, 1 << i)


def flip(v, i, n):
    """``v[x ^ (1 << i)]`` for every state x."""
    return _split(v, i, n)[:, ::-1, :].reshape(-1)


def edges(n):
    """All hypercube edges as index arrays (lo, hi), bit i clear in lo, grouped by i."""
    idx = np.arange(1 << n)
    lo = np.concatenate([_split(idx, i, n)[:, 0, :].reshape(-1) for i in range(n)])
    hi = lo ^ np.repeat(1 << np.arange(n), 1 << (n - 1))
    return lo, hi


def edge_conductances(probs) -> np.ndarray:
    """nu(x) nu(y) / (nu(x) + nu(y)) for every edge, in :func:`edges` order."""
    p = np.asarray(probs)
    n = int(round(math.log2(p.shape[0])))
    out = []
    for i in range(n):
        s = _split(p, i, n)
        a, b = s[:, 0, :], s[:, 1, :]
        out.append((a * b / (a + b)).reshape(-1))
    return np.concatenate(out)


def _coerce(dist, phi):
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != dist.probs.shape:
        raise DimensionError(f"test function has shape {phi.shape}, expected {dist.probs.shape}")
    return phi


# -- functionals ------------------------------------------------------------

def expectation(dist: ExactDistribution, phi) -> float:
    return float(dist.probs @ _coerce(dist, phi))


def variance(dist: ExactDistribution, phi) -> float:
    phi = _coerce(dist, phi)
    p = dist.probs
    m = float(p @ phi)
    return float(p @ (phi - m) ** 2)


def dirichlet_form_conditional(dist: ExactDistribution, phi) -> float:
    """E_nu sum_i (E[phi | X_{~i}] - phi(X))^2 from exact conditionals."""
    phi = _coerce(dist, phi)
    p, n = dist.probs, dist.n
    total = 0.0
    for i in range(n):
        pf, phif = flip(p, i, n), flip(phi, i, n)
        cond = (p * phi + pf * phif) / (p + pf)
        total += float(p @ (cond - phi) ** 2)
    return total


def dirichlet_form_edges(dist: ExactDistribution, phi) -> float:
    """sum over hypercube edges x~y of nu(x)nu(y)/(nu(x)+nu(y)) (phi(x)-phi(y))^2."""
    phi = _coerce(dist, phi)
    p, n = dist.probs, dist.n
    total = 0.0
    for i in range(n):
        s, f = _split(p, i, n), _split(phi, i, n)
        a, b = s[:, 0, :], s[:, 1, :]
        total += float(np.sum(a * b / (a + b) * (f[:, 0, :] - f[:, 1, :]) ** 2))
    return total


def discrete_gradient_form(dist: ExactDistribution, phi) -> float:
    """E_nu sum_i (phi(x, x_i=+1) - phi(x, x_i=-1))^2."""
    phi = _coerce(dist, phi)
    p, n = dist.probs, dist.n
    total = 0.0
    for i in range(n):
        s, f = _split(p, i, n), _split(phi, i, n)
        total += float(np.sum((s[:, 0, :] + s[:, 1, :]) * (f[:, 0, :] - f[:, 1, :]) ** 2))
    return total


def covariance_matrix(dist: ExactDistribution) -> np.ndarray:
    n, p = dist.n, dist.probs
    N = 1 << n
    bits = np.arange(n)
    second = np.zeros((n, n))
    mean = np.zeros(n)
    chunk = 1 << 16
    for start in range(0, N, chunk):
        idx = np.arange(start, min(N, start + chunk))
        X = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        w = p[start:start + len(idx)]
        mean += w @ X
        second += X.T @ (w[:, None] * X)
    return second - np.outer(mean, mean)


def tv_distance(p, q, tol=1e-9) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError("distributions have different lengths")
    for name, r in (("p", p), ("q", q)):
        if abs(float(np.sum(r)) - 1.0) > tol or np.any(r < -tol):
            raise ValueError(f"{name} is not a normalized probability vector")
    return float(0.5 * np.sum(np.abs(p - q)))


# -- Glauber generator ------------------------------------------------------

def generator_matrix(dist: ExactDistribution) -> np.ndarray:
    """Dense rate matrix L of continuous-time heat-bath Glauber dynamics.

    L[x, x^i] = nu(x^i) / (nu(x) + nu(x^i)) and rows sum to zero.
    """
    n, p = dist.n, dist.probs
    N = 1 << n
    L = np.zeros((N, N))
    idx = np.arange(N)
    for i in range(n):
        pf = flip(p, i, n)
        L[idx, idx ^ (1 << i)] = pf / (p + pf)
    L[idx, idx] = -L.sum(axis=1)
    return L


def symmetrized_generator(dist: ExactDistribution) -> np.ndarray:
    """D^{1/2} L D^{-1/2} with D = diag(nu); symmetric, same spectrum as L."""
    n, p = dist.n, dist.probs
    N = 1 << n
    S = np.zeros((N, N))
    idx = np.arange(N)
    diag = np.zeros(N)
    for i in range(n):
        pf = flip(p, i, n)
        S[idx, idx ^ (1 << i)] = np.sqrt(p * pf) / (p + pf)
        diag -= pf / (p + pf)
    S[idx, idx] = diag
    return S


def _gap_dense(dist):
    S = symmetrized_generator(dist)
    N = S.shape[0]
    if N == 2:
        w, V = np.linalg.eigh(S)
    else:
        w, V = scipy.linalg.eigh(S, subset_by_index=[N - 2, N - 1])
    lam, vec = w[0], V[:, 0]
    residual = float(np.linalg.norm(S @ vec - lam * vec))
    return -float(lam), residual


def _gap_iterative(dist):
    n, p = dist.n, dist.probs
    psi = np.sqrt(p)
    off = []
    diag = np.zeros_like(p)
    for i in range(n):
        pf = flip(p, i, n)
        off.append(_split(np.sqrt(p * pf) / (p + pf), i, n))
        diag -= pf / (p + pf)

    def S_mv(v):
        v = np.asarray(v).reshape(-1)
        out = diag * v
        for i in range(n):
            out += (off[i] * _split(v, i, n)[:, ::-1, :]).reshape(-1)
        return out

    def B_mv(v):
        v = np.asarray(v).reshape(-1)
        return S_mv(v) + n * v - n * psi * (psi @ v)

    N = p.shape[0]
    B = scipy.sparse.linalg.LinearOperator((N, N), matvec=B_mv, dtype=np.float64)
    try:
        theta, vec = scipy.sparse.linalg.eigsh(B, k=1, which="LA", tol=1e-12, maxiter=20 * N)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise NumericalError("iterative gap computation did not converge") from exc
    lam = float(theta[0]) - n
    vec = vec[:, 0]
    residual = float(np.linalg.norm(S_mv(vec) - lam * vec))
    return -lam, residual


def spectral_gap(model: IsingModel, method: str = "auto") -> GapReport:
    """Exact Glauber spectral gap versus the certificate 1 - spread."""
    n = model.n
    if method == "auto":
        method = "dense" if n <= MAX_DENSE_N else "iterative"
    if method == "dense":
        _check_n(n, MAX_DENSE_N, "dense spectral_gap")
    elif method == "iterative":
        _check_n(n, MAX_ITERATIVE_N, "iterative spectral_gap")
    else:
        raise ValueError(f"unknown method {method!r}")
    canon = canonicalize(model)
    dist = enumerate_distribution(model)
    gap, residual = (_gap_dense if method == "dense" else _gap_iterative)(dist)
    converged = residual <= RESIDUAL_TOL * max(1.0, n)
    passed = converged and gap >= canon.gamma - GAP_TOL
    return GapReport(canon.gamma, max(gap, 0.0), bool(passed), method, residual, canon.spread)


# -- Dirichlet-form witness ----------------------------------------------------

def _witness_state(model: IsingModel) -> np.ndarray:
    row = model.J[0].copy()
    row[0] = 0.0
    if not np.any(row != 0):
        raise ValueError("first row of J has no off-diagonal coupling")
    a = np.where(row >= 0, 1, -1)
    a[0] = -1
    return a


def witness_report(model: IsingModel) -> dict:
    """Both Dirichlet forms of the witness phi = 1[x = a] / sqrt(nu(a)).

    Only energy differences between ``a`` and its neighbours enter, so no
    partition function (and no cap on n) is needed.
    """
    a = _witness_state(model)
    E_a = energy(model, a)
    dE = np.empty(model.n)
    for i in range(model.n):
        b = a.copy()
        b[i] = -b[i]
        dE[i] = energy(model, b) - E_a
    edge = float(np.sum(expit(dE)))
    grad = float(np.sum(1.0 + np.exp(dE)))
    row_l1 = float(np.sum(np.abs(model.J[0, 1:])))
    return {
        "a": a.tolist(),
        "edge_form": edge,
        "gradient_form": grad,
        "ratio": grad / edge,
        "edge_form_le_n": bool(edge <= model.n),
        "row_l1": row_l1,
        "exp_2_row_l1": math.exp(2.0 * row_l1),
    }


def witness_function(model: IsingModel):
    """Return (phi, report) with phi materialized over all states (n <= 20)."""
    _check_n(model.n, MAX_ITERATIVE_N, "witness_function")
    report = witness_report(model)
    dist = enumerate_distribution(model)
    k = int(np.sum(((np.array(report["a"]) < 0).astype(np.int64)) << np.arange(model.n)))
    phi = np.zeros(1 << model.n)
    phi[k] = 1.0 / math.sqrt(dist.probs[k])
    return phi, report


# -- named test functions ---------------------------------------------------

def magnetization(n):
    idx = np.arange(1 << n)
    return sum(1.0 - 2.0 * ((idx >> i) & 1) for i in range(n))


def coordinate(n, k):
    if not 0 <= k < n:
        raise IndexError(f"coordinate {k} out of range for n={n}")
    return 1.0 - 2.0 * ((np.arange(1 << n) >> k) & 1)


def parity(n):
    idx = np.arange(1 << n)
    ones = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        ones += (idx >> i) & 1
    return 1.0 - 2.0 * (ones & 1)


def load_phi_csv(path, n):
    """CSV rows ``index,value``; a header line is allowed. Every state must appear once."""
    vals = np.full(1 << n, np.nan)
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line[0].isalpha():
            continue
        k, v = line.split(",")[:2]
        vals[int(k)] = float(v)
    if not np.all(np.isfinite(vals)):
        raise ValueError("test-function file must give a finite value for every state")
    return vals


def test_function(name: str, model: IsingModel) -> np.ndarray:
    """Resolve ``magnetization``, ``coordinate:k``, ``parity``, ``witness`` or ``file:<path>``."""
    n = model.n
    if name == "magnetization":
        return magnetization(n)
    if name == "parity":
        return parity(n)
    if name == "witness":
        return witness_function(model)[0]
    if name.startswith("coordinate:"):
        return coordinate(n, int(name.split(":", 1)[1]))
    if name.startswith("file:"):
        return load_phi_csv(name.split(":", 1)[1], n)
    raise ValueError(f"unknown test function {name!r}")
