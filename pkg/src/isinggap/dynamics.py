"""Glauber dynamics: simulation, exact transition kernels and mixing times."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse

from . import _backend
from .errors import CapExceededError, CertificateUnavailable, DimensionError
from .exact import enumerate_distribution, flip, generator_matrix
from .model import IsingModel, canonicalize, decode, encode, local_field
from .rng import SeededRng

MAX_TRANSITION_N = 12
MAX_MIXING_N = 10
CHUNK = 1 << 20


def glauber_step(model: IsingModel, x, i: int, u: float):
    """Heat-bath update of site ``i`` driven by the uniform draw ``u``.

    ``x_i`` becomes +1 iff ``u < (1 + tanh(m_i)) / 2``. Accepts and returns a
    state index, or a +-1 vector if one is given.
    """
    as_index = isinstance(x, (int, np.integer))
    xs = decode(int(x), model.n) if as_index else np.array(x, dtype=np.int64)
    p_plus = 0.5 * (1.0 + math.tanh(local_field(model, xs, i)))
    xs[i] = 1 if u < p_plus else -1
    return encode(xs) if as_index else xs


@dataclass
class ChainConfig:
    steps: int
    seed: SeededRng
    replicas: int = 1
    time_model: str = "discrete"
    record_every: int | None = None

    def __post_init__(self):
        if self.steps < 0 or self.replicas < 1:
            raise ValueError("need steps >= 0 and replicas >= 1")
        if self.time_model not in ("discrete", "continuous"):
            raise ValueError("time_model must be 'discrete' or 'continuous'")


@dataclass
class ChainResult:
    """Per-replica records. Discrete time records every ``record_every``
    updates; continuous time records at integer times."""

    times: np.ndarray
    magnetization: np.ndarray
    state_index: np.ndarray
    sites: np.ndarray
    final_states: np.ndarray


def _run_discrete(model, x, rng, steps, record_every):
    n = model.n
    mags, idxs, sites_rec = [], [], []
    done = 0
    while done < steps:
        m = min(steps - done, max(record_every, CHUNK // record_every * record_every))
        sites = rng.integers(n, m)
        u = rng.uniform(m)
        mg, ix = _backend.glauber_run(model.J, model.h, x, sites, u, record_every)
        mags.append(mg)
        idxs.append(ix)
        sites_rec.append(sites[record_every - 1::record_every][: len(mg)])
        done += m
    def cat(parts):
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    return cat(mags), cat(idxs), cat(sites_rec)


def _run_continuous(model, x, rng, units):
    n = model.n
    mags = np.empty(units, dtype=np.int64)
    idxs = np.empty(units, dtype=np.int64)
    sites_rec = np.full(units, -1, dtype=np.int64)
    mag = int(np.sum(x))
    idx = encode(x) if n <= 62 else -1
    t = 0
    while t < units:
        block = min(units - t, max(1, CHUNK // n))
        counts = rng.poisson(n, block)
        total = int(counts.sum())
        sites = rng.integers(n, total)
        u = rng.uniform(total)
        mg, ix = _backend.glauber_run(model.J, model.h, x, sites, u, 1)
        ends = np.cumsum(counts) - 1
        for b in range(block):
            if ends[b] >= 0:
                mag, idx = int(mg[ends[b]]), int(ix[ends[b]])
            if counts[b] > 0:
                sites_rec[t + b] = sites[ends[b]]
            mags[t + b] = mag
            idxs[t + b] = idx
        t += block
    return mags, idxs, sites_rec


def run_chain(model: IsingModel, x0, config: ChainConfig) -> ChainResult:
    """Simulate ``config.replicas`` independent chains from ``x0``.

    Replica ``r`` draws from ``config.seed.child(r)``. Discrete time: ``steps``
    single-site updates at uniform sites. Continuous time: ``steps`` time
    units, each a Poisson(n) number of updates.
    """
    n = model.n
    start = decode(int(x0), n) if isinstance(x0, (int, np.integer)) else np.asarray(x0)
    if start.shape != (n,):
        raise DimensionError("initial state has the wrong length")
    rec = config.record_every or (n if config.time_model == "discrete" else 1)
    runs, finals = [], []
    for r in range(config.replicas):
        x = np.array(start, dtype=np.int8)
        rng = config.seed.child(r)
        if config.time_model == "discrete":
            runs.append(_run_discrete(model, x, rng, config.steps, rec))
        else:
            runs.append(_run_continuous(model, x, rng, config.steps))
        finals.append(x)
    if config.time_model == "discrete":
        times = rec * np.arange(1, config.steps // rec + 1)
    else:
        times = np.arange(1, config.steps + 1)
    return ChainResult(
        times=times,
        magnetization=np.array([r[0] for r in runs]),
        state_index=np.array([r[1] for r in runs]),
        sites=np.array([r[2] for r in runs]),
        final_states=np.array(finals),
    )


def write_trajectory_csv(path, result: ChainResult, replica: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "site", "magnetization"])
        for t, s, m in zip(result.times, result.sites[replica], result.magnetization[replica]):
            w.writerow([int(t), int(s), int(m)])


# -- exact kernels ------------------------------------------------------------

def transition_matrix(model: IsingModel) -> scipy.sparse.csr_matrix:
    """Discrete-time random-scan heat-bath kernel as a sparse 2^n x 2^n matrix."""
    n = model.n
    if n > MAX_TRANSITION_N:
        raise CapExceededError(f"transition_matrix needs n <= {MAX_TRANSITION_N}")
    p = enumerate_distribution(model).probs
    N = 1 << n
    idx = np.arange(N)
    rows, cols, vals = [], [], []
    stay = np.ones(N)
    for i in range(n):
        pf = flip(p, i, n)
        q = pf / (p + pf) / n
        rows.append(idx)
        cols.append(idx ^ (1 << i))
        vals.append(q)
        stay -= q
    rows.append(idx)
    cols.append(idx)
    vals.append(stay)
    return scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )


def _worst_tv(P, pi):
    return float(np.max(0.5 * np.sum(np.abs(P - pi), axis=1)))


def _uniformized_kernel(L, n, s, tail=1e-14):
    """exp(s L) as a Poisson(n s) mixture of powers of I + L/n."""
    N = L.shape[0]
    P = np.eye(N) + L / n
    lam = n * s
    weight = math.exp(-lam)
    term = np.eye(N)
    K = weight * term
    acc = weight
    k = 0
    while 1.0 - acc > tail:
        k += 1
        term = term @ P
        weight *= lam / k
        K += weight * term
        acc += weight
        if k > 10_000:
            break
    return K


@dataclass
class MixingTime:
    time: float
    resolution: float
    monotone: bool
    profile: list = field(default_factory=list)


def mixing_time_exact(model: IsingModel, epsilon: float, time_model: str = "continuous",
                      dt: float = 0.1, refine: int = 10) -> MixingTime:
    """First time the worst-start TV distance to equilibrium is <= epsilon.

    Continuous time uses uniformization (rate cap n) on a grid of step ``dt``
    and then bisects the bracketing interval ``refine`` times; the returned
    time is the right end of the final bracket. Discrete time counts steps.
    """
    n = model.n
    if n > MAX_MIXING_N:
        raise CapExceededError(f"mixing_time_exact needs n <= {MAX_MIXING_N}")
    if epsilon >= 1.0:
        return MixingTime(0.0, 0.0, True, [1.0])
    dist = enumerate_distribution(model)
    pi = dist.probs
    N = 1 << n
    D = np.eye(N)
    d_prev = _worst_tv(D, pi)
    profile = [d_prev]
    monotone = True
    if d_prev <= epsilon:
        return MixingTime(0.0, 0.0, True, profile)
    if time_model == "discrete":
        P = transition_matrix(model)
        steps = 0
        while True:
            D = (P.T @ D.T).T
            steps += 1
            d = _worst_tv(D, pi)
            monotone &= d <= d_prev + 1e-12
            profile.append(d)
            d_prev = d
            if d <= epsilon:
                return MixingTime(float(steps), 1.0, monotone, profile)
    if time_model != "continuous":
        raise ValueError("time_model must be 'discrete' or 'continuous'")
    L = generator_matrix(dist)
    K = _uniformized_kernel(L, n, dt)
    k = 0
    while True:
        prev = D
        D = D @ K
        k += 1
        d = _worst_tv(D, pi)
        monotone &= d <= d_prev + 1e-12
        profile.append(d)
        d_prev = d
        if d <= epsilon:
            break
    lo, lo_t, s = prev, (k - 1) * dt, dt
    hi_t = k * dt
    for _ in range(refine):
        s /= 2
        mid = lo @ _uniformized_kernel(L, n, s)
        if _worst_tv(mid, pi) <= epsilon:
            hi_t = lo_t + s
        else:
            lo, lo_t = mid, lo_t + s
    return MixingTime(hi_t, s, monotone, profile)


def _certified_norm(model):
    spread = canonicalize(model).spread
    if spread >= 1.0:
        raise CertificateUnavailable(f"spread {spread:.6g} >= 1: no mixing certificate")
    return spread


def mixing_bound_continuous(model: IsingModel, epsilon: float) -> float:
    """((1 + 2s) n + 2|h|_1 + log(1/eps)) / (1 - s) with s the canonical spread."""
    s = _certified_norm(model)
    h1 = float(np.sum(np.abs(model.h)))
    return ((1.0 + 2.0 * s) * model.n + 2.0 * h1 + math.log(1.0 / epsilon)) / (1.0 - s)


def mixing_bound_discrete(model: IsingModel, epsilon: float) -> float:
    """Order-of-magnitude discrete-time bound: n times the continuous bound."""
    return model.n * mixing_bound_continuous(model, epsilon)


@dataclass
class MixingReport:
    epsilon: float
    t_exact: float
    t_bound_continuous: float
    t_bound_discrete: float
    passed: bool
    time_model: str
    resolution: float
    monotone: bool
    bound_kind: str = "continuous: sharp formula; discrete: order bound"

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def mixing_report(model: IsingModel, epsilon: float, time_model: str = "continuous") -> MixingReport:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    bc = mixing_bound_continuous(model, epsilon)
    bd = model.n * bc
    mt = mixing_time_exact(model, epsilon, time_model)
    bound = bc if time_model == "continuous" else bd
    return MixingReport(epsilon, mt.time, bc, bd, bool(mt.time <= bound), time_model,
                        mt.resolution, mt.monotone)
