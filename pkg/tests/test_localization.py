import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isinggap import localization as loc
from isinggap.errors import CapExceededError, DimensionError
from isinggap.exact import enumerate_distribution, magnetization
from isinggap.generators import curie_weiss, random_psd_model
from isinggap.model import IsingModel, RankOnePair, canonicalize, rank_one_model
from isinggap.rng import SeededRng


def random_subspace(n, d, r):
    Q, _ = np.linalg.qr(r.normal(size=(n, n)))
    return Q[:, :d]


def test_smoothing_phi():
    assert loc.smoothing_phi(0.0, 0.1) == 1.0
    z = np.linspace(0, 1, 1001)
    assert np.max(z * loc.smoothing_phi(z, 0.1)) <= 0.1 * math.exp(-0.5) + 1e-15
    with pytest.raises(ValueError):
        loc.smoothing_phi(-1.0, 0.1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.data(), st.floats(1e-3, 1.0), st.integers(0, 2 ** 32 - 1))
def test_control_matrix_properties(n, data, delta, seed):
    d = data.draw(st.integers(0, n))
    r = np.random.default_rng(seed)
    Q = random_subspace(n, d, r)
    v = r.normal(size=n) * r.choice([1e-4, 1e-2, 1.0, 10.0])
    C = loc.control_matrix(v, Q, delta)
    P = Q @ Q.T
    np.testing.assert_allclose(C, C.T, atol=0)
    assert np.linalg.eigvalsh(C)[0] >= -1e-12
    assert np.linalg.norm((np.eye(n) - P) @ C, 2) <= 1e-12
    assert np.trace(C) >= d - 1 - 1e-12
    assert np.linalg.norm(C @ v) <= delta + 1e-12


def test_control_matrix_special_cases():
    assert not np.any(loc.control_matrix(np.ones(3), np.zeros((3, 0)), 0.1))
    Q = np.eye(3)[:, :2]
    np.testing.assert_allclose(loc.control_matrix(np.array([0, 0, 1.0]), Q, 0.1), Q @ Q.T)
    with pytest.raises(ValueError):
        loc.control_matrix(np.ones(3), np.ones((3, 2)), 0.1)
    with pytest.raises(DimensionError):
        loc.control_matrix(np.ones(3), np.eye(2), 0.1)


def test_positive_eigenspace():
    J = np.diag([0.0, 1e-12, 0.5, 2.0])
    Q = loc.positive_eigenspace(J, 1e-9)
    assert Q.shape == (4, 2)
    np.testing.assert_allclose(Q @ Q.T, np.diag([0, 0, 1.0, 1.0]), atol=1e-14)


def test_single_step_updates():
    m = random_psd_model(3, 0.6, SeededRng(1))
    phi = magnetization(3)
    params = loc.ControlParams(dt=1e-3)
    s0 = loc.initial_state(m, phi)
    dW = math.sqrt(params.dt) * SeededRng(2).normal(3)
    Q = loc.positive_eigenspace(s0.Jt, 1e-8)
    C = loc.control_matrix(s0.V, Q, params.delta)
    s1 = loc.localization_step(s0, dW, params, control=C)
    assert s1.probs.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(s1.Jt, s0.Jt - params.dt * C @ C, atol=1e-14)
    assert s1.t == pytest.approx(params.dt)
    X = s0.X
    expected = s0.logF + (X - s0.a) @ C @ dW - 0.5 * params.dt * np.sum(((X - s0.a) @ C) ** 2, axis=1)
    expected -= math.log(np.sum(np.exp(s0.log_nu0 + expected)))
    np.testing.assert_allclose(s1.logF, expected, atol=1e-13)
    assert abs(s1.mass_error) < 0.05
    assert s1.M == pytest.approx(s1.probs @ phi)


def test_log_density_keeps_quadratic_form_of_J_t():
    # log nu_t - 0.5 <x, J_t x> stays affine in x along the path
    m = random_psd_model(4, 0.7, SeededRng(3))
    params = loc.ControlParams().resolved(m.J)
    state = loc.initial_state(m, magnetization(4))
    rng = SeededRng(4)
    for _ in range(200):
        Q = loc.positive_eigenspace(state.Jt, params.rank_tol, state.eig)
        C = loc.control_matrix(state.V, Q, params.delta)
        state = loc.localization_step(state, math.sqrt(params.dt) * rng.normal(4), params, control=C)
    X = state.X
    g = np.log(state.probs) - 0.5 * np.einsum("ki,ij,kj->k", X, state.Jt, X)
    A = np.hstack([np.ones((16, 1)), X])
    coef, *_ = np.linalg.lstsq(A, g, rcond=None)
    assert np.max(np.abs(A @ coef - g)) < 1e-10


def test_extract_rank_one_recovers_parameters():
    u = np.array([0.6, -0.3, 0.2])
    v = np.array([0.1, 0.4, -0.2])
    d = enumerate_distribution(rank_one_model(RankOnePair(u, v)))
    got_u, got_v, res = loc.extract_rank_one(d, np.outer(u, u))
    assert res < 1e-12
    assert np.allclose(got_u, u) or np.allclose(got_u, -u)
    np.testing.assert_allclose(got_v, v, atol=1e-12)
    with pytest.raises(ValueError):
        loc.extract_rank_one(d, np.eye(3))


def test_run_localization_path():
    m = random_psd_model(4, 0.7, SeededRng(7))
    phi = magnetization(4)
    p = loc.run_localization(m, phi, loc.ControlParams(), SeededRng(1))
    q = loc.run_localization(m, phi, loc.ControlParams(), SeededRng(1))
    assert p.terminated and p.final_rank <= 1 and p.residual < 1e-6
    assert p.T == q.T and np.array_equal(p.u, q.u)
    assert p.T <= 0.5 * np.trace(m.J) + 5e-3
    assert p.grid_dirichlet.shape[0] >= 1 and p.grid_conductance.shape[1] == 32
    assert p.clamped_total == 0.0
    # terminal measure matches the extracted rank-one measure
    r1 = enumerate_distribution(rank_one_model(p.pair)).probs
    assert 0.5 * np.abs(r1 - p.terminal_probs).sum() < 1e-6
    assert set(p.summary()) >= {"u", "v", "residual", "M_drift"}


def test_rank_one_start_stops_immediately():
    m = canonicalize(curie_weiss(4, 0.5)).model
    p = loc.run_localization(m, magnetization(4), loc.ControlParams(), SeededRng(0))
    assert p.T == 0 and p.steps == 0 and p.terminated
    np.testing.assert_allclose(np.outer(p.u, p.u), m.J, atol=1e-12)
    assert p.residual < 1e-12


def test_run_localization_rejects_bad_inputs():
    with pytest.raises(ValueError):
        loc.run_localization(IsingModel(-np.eye(2) + 0.5 * np.ones((2, 2)) - np.eye(2), np.zeros(2)),
                             magnetization(2), loc.ControlParams(), SeededRng(0))
    with pytest.raises(CapExceededError):
        loc.initial_state(IsingModel(np.zeros((15, 15)), np.zeros(15)), np.zeros(2 ** 15))
    with pytest.raises(DimensionError):
        loc.initial_state(IsingModel(np.zeros((2, 2)), np.zeros(2)), np.zeros(3))
    with pytest.raises(ValueError):
        loc.ControlParams(dt=0)


def test_trace_csv(tmp_path):
    m = random_psd_model(3, 0.5, SeededRng(2))
    p = loc.run_localization(m, magnetization(3), loc.ControlParams(), SeededRng(3))
    f = tmp_path / "trace.csv"
    loc.write_trace_csv(f, p)
    rows = list(csv.reader(open(f)))
    assert tuple(rows[0]) == loc.TRACE_COLUMNS
    traces = [float(r[1]) for r in rows[1:]]
    assert all(b <= a + 1e-12 for a, b in zip(traces, traces[1:]))
    assert int(rows[-1][2]) <= 1


def test_decomposition_independent_of_workers():
    m = random_psd_model(3, 0.5, SeededRng(2))
    phi = magnetization(3)
    a = loc.needle_decomposition(m, phi, 6, loc.ControlParams(), SeededRng(9), workers=1)
    b = loc.needle_decomposition(m, phi, 6, loc.ControlParams(), SeededRng(9), workers=2)
    assert a.to_dict() == b.to_dict()
    with pytest.raises(ValueError):
        loc.supermartingale_check(a)
