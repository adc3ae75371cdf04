"""Stochastic localization of Ising measures and needle decompositions.

The measure nu_t = F_t nu_0 is driven by

    dJ_t = -C_t^2 dt,        dF_t(x) = F_t(x) <C_t (x - a_t), dW_t>,

with C_t = C(V_t, H_t) the smoothed projection onto the positive eigenspace
H_t of J_t with the direction of the test-adjusted barycenter V_t damped.
Weights are advanced in log space with the exact Gaussian increment

    log F(x) += <C(x - a), dW> - |C(x - a)|^2 h / 2

and renormalized every step, so the quadratic part of log nu_t is exactly
0.5 <x, J_t x>. A step that would push an eigenvalue of J_t below zero is
shortened (bisection) so the eigenvalue lands in [0, rank_tol]; after that it
drops out of H_t. Paths stop once rank(J_t) <= 1, leaving a rank-one Ising
measure exp(0.5 <u, x>^2 + <v, x>) / Z.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .errors import CapExceededError, DimensionError, NumericalError
from .exact import (ExactDistribution, dirichlet_form_edges, edge_conductances, enumerate_distribution)
from .model import IsingModel, RankOnePair, rank_one_model, spins
from .rng import SeededRng

MAX_LOCALIZATION_N = 14
MAX_CONDUCTANCE_N = 8
GRAM_TOL = 1e-10
RESIDUAL_CLEAN = 1e-3


@dataclass
class ControlParams:
    delta: float = 1e-2
    dt: float = 1e-3
    rank_tol: float | None = None
    max_time: float | None = None
    grid_interval: float = 0.05

    def __post_init__(self):
        if not (self.delta > 0 and self.dt > 0 and self.grid_interval > 0):
            raise ValueError("delta, dt and grid_interval must be positive")
        if self.rank_tol is not None and not self.rank_tol > 0:
            raise ValueError("rank_tol must be positive")

    def resolved(self, J0) -> "ControlParams":
        tr = float(np.trace(J0))
        return replace(
            self,
            rank_tol=self.rank_tol if self.rank_tol is not None else 1e-8 * max(1.0, tr),
            max_time=self.max_time if self.max_time is not None else 1.5 * tr / 2.0,
        )


def smoothing_phi(z, delta):
    """exp(-z^2 / (2 delta^2)); z * phi(z) <= delta e^{-1/2} for z >= 0."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    out = np.exp(-(z * z) / (2.0 * delta * delta))
    return float(out) if out.ndim == 0 else out


def positive_eigenspace(J, rank_tol, eig=None):
    """Orthonormal basis (columns) of the span of eigenvectors with eigenvalue > rank_tol."""
    w, V = eig if eig is not None else linalg.eigh(J)
    return V[:, w > rank_tol]


def control_matrix(v, H_basis, delta):
    """Proj_H + (phi(|v_1|) - 1) v1_hat v1_hat^T with v_1 = Proj_H v."""
    Q = np.asarray(H_basis, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if Q.ndim != 2 or Q.shape[0] != n:
        raise DimensionError("basis must be an (n, d) array")
    d = Q.shape[1]
    if d == 0:
        return np.zeros((n, n))
    gram = float(np.max(np.abs(Q.T @ Q - np.eye(d))))
    if gram > GRAM_TOL:
        raise ValueError(f"basis is not orthonormal (Gram residual {gram:.3g})")
    P = Q @ Q.T
    v1 = Q @ (Q.T @ v)
    r = float(np.linalg.norm(v1))
    if r == 0.0:
        return P
    vh = v1 / r
    C = P + (smoothing_phi(r, delta) - 1.0) * np.outer(vh, vh)
    return 0.5 * (C + C.T)


@dataclass
class LocalizationState:
    t: float
    logF: np.ndarray
    Jt: np.ndarray
    a: np.ndarray
    V: np.ndarray
    M: float
    Y: float
    dissipated: float
    # shared context, not copied between steps
    log_nu0: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    eig: tuple = field(repr=False, default=None)
    mass_error: float = 0.0
    clamped: float = 0.0

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_nu0 + self.logF)


def _moments(probs, phi, X):
    M = float(probs @ phi)
    a = X.T @ probs
    V = X.T @ (probs * phi) - M * a
    Y = float(probs @ (phi - M) ** 2)
    return a, V, M, Y


def initial_state(model: IsingModel, phi) -> LocalizationState:
    n = model.n
    if n > MAX_LOCALIZATION_N:
        raise CapExceededError(f"localization needs n <= {MAX_LOCALIZATION_N}")
    dist = enumerate_distribution(model)
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != dist.probs.shape:
        raise DimensionError("test function has the wrong length")
    X = spins(n)
    log_nu0 = np.log(dist.probs)
    a, V, M, Y = _moments(dist.probs, phi, X)
    J = np.array(model.J)
    return LocalizationState(0.0, np.zeros_like(log_nu0), J, a, V, M, Y, 0.0,
                             log_nu0, phi, X, linalg.eigh(J))


def localization_step(state: LocalizationState, dW, params: ControlParams,
                      h: float | None = None, control=None) -> LocalizationState:
    """One log-space Euler step of length ``h`` (default ``params.dt``).

    ``dW`` must already be scaled by sqrt(h). Negative eigenvalues of the
    updated J_t are clamped at zero and the clamped mass is recorded.
    """
    h = params.dt if h is None else h
    rank_tol = params.rank_tol if params.rank_tol is not None else 1e-8 * max(1.0, np.trace(state.Jt))
    if control is None:
        Q = positive_eigenspace(state.Jt, rank_tol, state.eig)
        control = control_matrix(state.V, Q, params.delta)
    C = control
    if not np.any(C):
        return replace(state, t=state.t + h, mass_error=0.0, clamped=0.0)
    dW = np.asarray(dW, dtype=np.float64)
    CX = (state.X - state.a) @ C
    xi = CX @ dW - 0.5 * h * np.einsum("ij,ij->i", CX, CX)
    logF = state.logF + xi
    log_p = state.log_nu0 + logF
    shift = float(np.max(log_p))
    mass = math.exp(shift) * float(np.sum(np.exp(log_p - shift)))
    if not np.isfinite(mass) or mass <= 0.0:
        raise NumericalError("weights collapsed during localization step")
    logF -= math.log(mass)
    probs = np.exp(state.log_nu0 + logF)
    a, V, M, Y = _moments(probs, state.phi, state.X)
    J = state.Jt - h * (C @ C)
    J = 0.5 * (J + J.T)
    w, U = linalg.eigh(J)
    clamped = 0.0
    if w[0] < 0.0:
        clamped = float(-np.sum(w[w < 0.0]))
        w = np.maximum(w, 0.0)
        J = (U * w) @ U.T
        J = 0.5 * (J + J.T)
    CV = C @ state.V
    return replace(
        state, t=state.t + h, logF=logF, Jt=J, a=a, V=V, M=M, Y=Y,
        dissipated=state.dissipated + h * float(CV @ CV), eig=(w, U),
        mass_error=mass - 1.0, clamped=clamped,
    )


def _hitting_step(Jt, Q, C, dt, rank_tol):
    """Largest step <= dt keeping the restricted spectrum of J_t - s C^2 >= 0."""
    JQ = Q.T @ Jt @ Q
    C2Q = Q.T @ (C @ C) @ Q

    def lam(s):
        return float(linalg.eigvalsh(JQ - s * C2Q)[0])

    if lam(dt) >= 0.0:
        return dt
    lo, hi = 0.0, dt
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = lam(mid)
        if val < 0.0:
            hi = mid
        elif val > rank_tol:
            lo = mid
        else:
            return mid
        if hi - lo <= 1e-300:
            break
    return lo if lo > 0.0 else hi


@dataclass
class NeedlePath:
    u: np.ndarray
    v: np.ndarray
    residual: float
    M0: float
    M_T: float
    Y0: float
    Y_T: float
    dissipated: float
    T: float
    steps: int
    terminated: bool
    final_rank: int
    mass_error_abs_mean: float
    clamped_total: float
    terminal_probs: np.ndarray = field(repr=False)
    trace_log: list = field(repr=False, default_factory=list)
    grid_dirichlet: np.ndarray = field(repr=False, default=None)
    grid_conductance: np.ndarray = field(repr=False, default=None)

    @property
    def M_drift(self) -> float:
        return abs(self.M_T - self.M0)

    @property
    def pair(self) -> RankOnePair:
        return RankOnePair(self.u, self.v)

    @property
    def clean(self) -> bool:
        return self.terminated and self.residual <= RESIDUAL_CLEAN

    def summary(self) -> dict:
        return {
            "u": self.u.tolist(), "v": self.v.tolist(), "residual": self.residual,
            "M_drift": self.M_drift, "T": self.T, "steps": self.steps,
            "terminated": self.terminated, "final_rank": self.final_rank,
        }


TRACE_COLUMNS = ("t", "trace_J", "rank_J", "M", "Y", "dirichlet_edge", "mass_error")


def _trace_row(state, rank_tol):
    dist = ExactDistribution(state.X.shape[1], state.log_nu0 + state.logF, state.probs, 0.0)
    return (state.t, float(np.trace(state.Jt)), int(np.sum(state.eig[0] > rank_tol)),
            state.M, state.Y, dirichlet_form_edges(dist, state.phi), state.mass_error)


def extract_rank_one(log_probs, Jt, rank_tol=1e-8):
    """Split log nu_T into 0.5 <u, x>^2 plus its best affine fit.

    ``u`` comes from the top eigenpair of ``Jt``; ``v`` is the degree-one
    Fourier coefficient of g = log nu_T - 0.5 <u, x>^2; the residual is the
    root-mean-square (uniform weights) of g minus its affine part.
    """
    if isinstance(log_probs, ExactDistribution):
        log_probs = np.log(log_probs.probs)
    g = np.asarray(log_probs, dtype=np.float64)
    n = int(round(math.log2(g.shape[0])))
    w, V = linalg.eigh(Jt)
    rank = int(np.sum(w > rank_tol))
    if rank > 1:
        raise ValueError(f"J_T has numerical rank {rank} > 1")
    u = math.sqrt(w[-1]) * V[:, -1] if w[-1] > rank_tol else np.zeros(n)
    X = spins(n)
    g = g - 0.5 * (X @ u) ** 2
    v = X.T @ g / g.shape[0]
    affine = float(np.mean(g)) + X @ v
    residual = float(np.sqrt(np.mean((g - affine) ** 2)))
    return u, v, residual


def run_localization(model: IsingModel, phi, params: ControlParams, rng: SeededRng,
                     record_grid: bool = True) -> NeedlePath:
    """Run one localization path until rank(J_t) <= 1 or ``max_time``."""
    w0 = linalg.eigvalsh(model.J)
    if w0[0] < -1e-9 * max(1.0, abs(w0[-1])):
        raise ValueError("run_localization needs a positive semidefinite J (canonicalize first)")
    params = params.resolved(model.J)
    rank_tol = params.rank_tol
    state = initial_state(model, phi)
    n = model.n
    M0, Y0 = state.M, state.Y
    want_edges = record_grid and n <= MAX_CONDUCTANCE_N
    trace = [_trace_row(state, rank_tol)]
    grid_d, grid_c = [], []
    next_grid = 0.0

    def record_grid_point():
        dist = ExactDistribution(n, None, state.probs, 0.0)
        grid_d.append(dirichlet_form_edges(dist, state.phi))
        if want_edges:
            grid_c.append(edge_conductances(state.probs))

    if record_grid:
        record_grid_point()
        next_grid = params.grid_interval
    z = np.zeros(0)
    zpos = 0
    steps = 0
    mass_err = []
    clamped = 0.0
    terminated = False
    log_every = max(1, int(round(params.grid_interval / params.dt)))
    while True:
        Q = positive_eigenspace(state.Jt, rank_tol, state.eig)
        if Q.shape[1] <= 1:
            terminated = True
            break
        if state.t >= params.max_time:
            break
        C = control_matrix(state.V, Q, params.delta)
        wpos = state.eig[0][state.eig[0] > rank_tol]
        h = params.dt
        if wpos[0] <= params.dt + rank_tol:
            h = _hitting_step(state.Jt, Q, C, params.dt, rank_tol)
        if zpos + n > z.shape[0]:
            z = rng.normal(4096 * n)
            zpos = 0
        dW = math.sqrt(h) * z[zpos:zpos + n]
        zpos += n
        state = localization_step(state, dW, params, h=h, control=C)
        steps += 1
        mass_err.append(abs(state.mass_error))
        clamped += state.clamped
        if steps % log_every == 0:
            trace.append(_trace_row(state, rank_tol))
        while record_grid and state.t >= next_grid - 1e-12:
            record_grid_point()
            next_grid += params.grid_interval
    if trace[-1][0] != state.t:
        trace.append(_trace_row(state, rank_tol))
    final_rank = int(np.sum(state.eig[0] > rank_tol))
    log_p = state.log_nu0 + state.logF
    if final_rank <= 1:
        u, v, residual = extract_rank_one(log_p, state.Jt, rank_tol)
    else:
        u, v, residual = np.zeros(n), np.zeros(n), float("inf")
    return NeedlePath(
        u=u, v=v, residual=residual, M0=M0, M_T=state.M, Y0=Y0, Y_T=state.Y,
        dissipated=state.dissipated, T=state.t, steps=steps, terminated=terminated,
        final_rank=final_rank,
        mass_error_abs_mean=float(np.mean(mass_err)) if mass_err else 0.0,
        clamped_total=clamped, terminal_probs=state.probs, trace_log=trace,
        grid_dirichlet=np.array(grid_d) if record_grid else None,
        grid_conductance=np.array(grid_c) if want_edges else None,
    )


def write_trace_csv(path, npath: NeedlePath) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in npath.trace_log:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


# -- ensembles --------------------------------------------------------------

@dataclass
class NeedleDecomposition:
    paths: list
    diagnostics: dict
    model: IsingModel = field(repr=False)
    phi: np.ndarray = field(repr=False)
    params: ControlParams = field(repr=False)

    def to_dict(self) -> dict:
        return {"paths": [p.summary() for p in self.paths], "diagnostics": self.diagnostics}


def _path_job(args):
    model, phi, params, rng = args
    return run_localization(model, phi, params, rng)


def _se(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def run_paths(model, phi, n_paths, params, rng, workers=1):
    jobs = [(model, phi, params, rng.child(k)) for k in range(n_paths)]
    if workers <= 1:
        return [_path_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_path_job, jobs, chunksize=max(1, n_paths // (4 * workers))))


def _rank_one_dist(path: NeedlePath) -> ExactDistribution:
    return enumerate_distribution(rank_one_model(path.pair))


def needle_decomposition(model: IsingModel, phi, n_paths: int, params: ControlParams,
                         rng: SeededRng, workers: int = 1, norm_tol: float = 0.05) -> NeedleDecomposition:
    """Mixture of rank-one measures from ``n_paths`` independent localization paths.

    Path k uses ``rng.child(k)``; aggregation is a fixed-order reduction, so
    the result does not depend on ``workers``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    paths = run_paths(model, phi, n_paths, params, rng, workers)
    return NeedleDecomposition(paths, decomposition_diagnostics(model, phi, paths, params, norm_tol),
                               model, phi, params)


def decomposition_diagnostics(model, phi, paths, params, norm_tol=0.05) -> dict:
    from .model import canonicalize

    nu0 = enumerate_distribution(model)
    target_mean = float(nu0.probs @ phi)
    target_var = float(nu0.probs @ (phi - target_mean) ** 2)
    spread = canonicalize(model).spread
    opnorm = linalg.opnorm(model.J)
    T0 = float(np.trace(model.J)) / 2.0
    dt = params.dt
    N = len(paths)
    ok = [p for p in paths if p.terminated and np.isfinite(p.residual)]
    failures = N - len(ok)
    d = {
        "n_paths": N,
        "failed_paths": failures,
        "spread": spread,
        "opnorm_J": opnorm,
        "T0": T0,
        "delta": params.delta,
        "dt": dt,
    }
    if not ok:
        return d
    wdists = [_rank_one_dist(p) for p in ok]
    means = np.array([float(w.probs @ phi) for w in wdists])
    wvars = np.array([float(w.probs @ (phi - m) ** 2) for w, m in zip(wdists, means)])
    u2 = np.array([float(p.u @ p.u) for p in ok])
    # conservation of the test-function mean
    d["conservation"] = {
        "target": target_mean,
        "mean": float(np.mean(means)),
        "variance": float(np.var(means, ddof=1)) if len(ok) > 1 else 0.0,
        "se": _se(means),
        "pass": bool(abs(np.mean(means) - target_mean) <= 3 * _se(means) + params.delta * math.sqrt(T0) + 1e-12),
    }
    d["norm_bound"] = {
        "fraction_u2_le_spread": float(np.mean(u2 <= spread + norm_tol)),
        "fraction_u_le_opnorm": float(np.mean(np.sqrt(u2) <= opnorm + norm_tol)),
        "max_u2": float(np.max(u2)),
        "tol": norm_tol,
    }
    totals = (means - target_mean) ** 2 + wvars
    d["total_variance"] = {
        "target": target_var,
        "between": float(np.mean((means - target_mean) ** 2)),
        "within": float(np.mean(wvars)),
        "se": _se(totals),
        "pass": bool(abs(np.mean(totals) - target_var) <= 3 * _se(totals) + 1e-12),
    }
    mix = np.mean([w.probs for w in wdists], axis=0)
    d["reconstruction_tv"] = float(0.5 * np.sum(np.abs(mix - nu0.probs)))
    mixT = np.mean([p.terminal_probs for p in ok], axis=0)
    d["reconstruction_tv_terminal"] = float(0.5 * np.sum(np.abs(mixT - nu0.probs)))
    if model.n <= MAX_CONDUCTANCE_N:
        cw = np.array([edge_conductances(w.probs) for w in wdists])
        c0 = edge_conductances(nu0.probs)
        se = np.std(cw, axis=0, ddof=1) / math.sqrt(len(ok)) if len(ok) > 1 else np.zeros_like(c0)
        excess = np.mean(cw, axis=0) - c0 - 3 * se
        d["conductance"] = {
            "n_edges": int(c0.shape[0]),
            "max_excess_over_3se": float(np.max(excess)),
            "pass": bool(np.all(excess <= 1e-12)),
        }
    MT = np.array([p.M_T for p in ok])
    M0 = ok[0].M0
    d["martingale"] = {
        "M0": M0,
        "mean_M_T": float(np.mean(MT)),
        "se": _se(MT),
        "budget": 3 * _se(MT) + params.delta * math.sqrt(T0),
        "pass": bool(abs(np.mean(MT) - M0) <= 3 * _se(MT) + params.delta * math.sqrt(T0) + 1e-12),
    }
    rel = np.array([p.Y_T + p.dissipated - p.Y0 for p in ok])
    d["quadratic_variation"] = {
        "mean": float(np.mean(rel)),
        "se": _se(rel),
        "pass": bool(abs(np.mean(rel)) <= 3 * _se(rel) + 1e-12),
    }
    Ts = np.array([p.T for p in ok])
    budget = 0.5 * float(np.trace(model.J)) * (1 + 5 * dt / max(float(np.trace(model.J)), 1e-300))
    d["stopping_time"] = {
        "max_T": float(np.max(Ts)),
        "mean_T": float(np.mean(Ts)),
        "half_trace_budget": budget,
        "fraction_within_half_trace": float(np.mean(Ts <= budget)),
        "fraction_within_trace": float(np.mean(Ts <= 2 * budget)),
    }
    res = np.array([p.residual for p in ok])
    d["extraction"] = {
        "max_residual": float(np.max(res)),
        "fraction_clean": float(np.mean(res <= RESIDUAL_CLEAN)),
    }
    d["mass_error_abs_mean"] = float(np.mean([p.mass_error_abs_mean for p in ok]))
    d["clamped_total"] = float(np.sum([p.clamped_total for p in ok]))
    return d


def _grid_matrix(series):
    L = max(len(s) for s in series)
    out = np.empty((len(series), L) + series[0].shape[1:])
    for k, s in enumerate(series):
        out[k, :len(s)] = s
        out[k, len(s):] = s[-1]
    return out


def supermartingale_check(decomposition, phi=None, min_paths: int = 16) -> dict:
    """Path-averaged Dirichlet form and edge conductances on the common time grid.

    Paths are held at their terminal value after stopping. Each consecutive
    increment of the mean must be <= 3 standard errors of the paired
    increments.
    """
    paths = decomposition.paths if hasattr(decomposition, "paths") else decomposition
    paths = [p for p in paths if p.grid_dirichlet is not None]
    if len(paths) < min_paths:
        raise ValueError(f"need at least {min_paths} paths for a statistical report, got {len(paths)}")
    N = len(paths)
    D = _grid_matrix([p.grid_dirichlet for p in paths])
    inc = np.diff(D, axis=1)
    mean_inc = inc.mean(axis=0)
    se_inc = inc.std(axis=0, ddof=1) / math.sqrt(N)
    ok = mean_inc <= 3 * se_inc + 1e-12
    z = np.where(se_inc > 0, mean_inc / np.where(se_inc > 0, se_inc, 1.0), 0.0)
    terminal_se = float(np.std(D[:, -1] - D[:, 0], ddof=1) / math.sqrt(N))
    report = {
        "n_paths": N,
        "grid_interval": decomposition.params.grid_interval if hasattr(decomposition, "params") else None,
        "mean_dirichlet": D.mean(axis=0).tolist(),
        "se_dirichlet": (D.std(axis=0, ddof=1) / math.sqrt(N)).tolist(),
        "dirichlet_monotone": bool(np.all(ok)),
        "worst_increment_z": float(np.max(z)) if z.size else 0.0,
        "terminal_le_initial": bool(D[:, -1].mean() <= D[:, 0].mean() + 3 * terminal_se + 1e-12),
    }
    if all(p.grid_conductance is not None for p in paths):
        G = _grid_matrix([p.grid_conductance for p in paths])
        ginc = np.diff(G, axis=1)
        gm = ginc.mean(axis=0)
        gse = ginc.std(axis=0, ddof=1) / math.sqrt(N)
        report["conductance_monotone"] = bool(np.all(gm <= 3 * gse + 1e-12))
        report["conductance_violations"] = int(np.sum(gm > 3 * gse + 1e-12))
        report["conductance_tests"] = int(gm.size)
    return report


def mass_error_order(model, phi, params: ControlParams, rng: SeededRng, n_paths: int = 32,
                     halvings: int = 2) -> dict:
    """Observed order of the per-step pre-renormalization mass error under dt-halving."""
    dts, errs = [], []
    for k in range(halvings + 1):
        p = replace(params, dt=params.dt / 2 ** k)
        paths = run_paths(model, phi, n_paths, p, rng)
        dts.append(p.dt)
        errs.append(float(np.mean([q.mass_error_abs_mean for q in paths])))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return {"dt": dts, "mass_error_abs_mean": errs, "order": slope}
