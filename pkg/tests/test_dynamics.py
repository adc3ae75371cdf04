import csv
import math

import numpy as np
import pytest

import oracles
from isinggap import dynamics
from isinggap.errors import CapExceededError, CertificateUnavailable, DimensionError
from isinggap.exact import enumerate_distribution
from isinggap.generators import curie_weiss, random_spread_model
from isinggap.model import IsingModel, decode
from isinggap.rng import SeededRng


def model(n, seed, scale=0.4):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n)) * scale
    return IsingModel(A + A.T, r.normal(size=n) * scale)


def test_glauber_step_threshold():
    m = IsingModel(np.zeros((2, 2)), [0.5, 0.0])
    p_plus = 0.5 * (1 + math.tanh(0.5))
    assert dynamics.glauber_step(m, 1, 0, p_plus - 1e-9) == 0
    assert dynamics.glauber_step(m, 0, 0, p_plus + 1e-9) == 1
    x = dynamics.glauber_step(m, np.array([1, -1]), 1, 0.99)
    assert x.tolist() == [1, -1]


def test_transition_matrix_against_generator():
    m = model(4, 3)
    P = dynamics.transition_matrix(m).toarray()
    L = oracles.heat_bath_generator(m.J, m.h)
    np.testing.assert_allclose(P, np.eye(16) + L / 4, atol=1e-14)
    pi = enumerate_distribution(m).probs
    np.testing.assert_allclose(pi @ P, pi, atol=1e-14)
    # reversibility
    F = pi[:, None] * P
    np.testing.assert_allclose(F, F.T, atol=1e-15)


def test_transition_matrix_cap():
    with pytest.raises(CapExceededError):
        dynamics.transition_matrix(IsingModel(np.zeros((13, 13)), np.zeros(13)))


def test_chain_reproducible_and_replicas_differ():
    m = model(6, 1)
    cfg = dynamics.ChainConfig(steps=600, seed=SeededRng(4), replicas=2, record_every=3)
    a = dynamics.run_chain(m, 0, cfg)
    b = dynamics.run_chain(m, 0, cfg)
    np.testing.assert_array_equal(a.state_index, b.state_index)
    assert a.magnetization.shape == (2, 200)
    assert not np.array_equal(a.state_index[0], a.state_index[1])
    np.testing.assert_array_equal(a.times, 3 * np.arange(1, 201))
    for r in range(2):
        idx = a.state_index[r]
        mags = np.array([decode(k, 6).sum() for k in idx])
        np.testing.assert_array_equal(mags, a.magnetization[r])
    final_idx = sum(1 << i for i, s in enumerate(a.final_states[0]) if s < 0)
    assert final_idx == a.state_index[0, -1]


def test_chain_matches_step_by_step_updates():
    m = model(5, 2)
    rng = SeededRng(8).child(0)
    res = dynamics.run_chain(m, 0, dynamics.ChainConfig(steps=50, seed=SeededRng(8), record_every=1))
    sites = rng.integers(5, 50)
    u = rng.uniform(50)
    k = 0
    for t in range(50):
        k = dynamics.glauber_step(m, k, int(sites[t]), float(u[t]))
        assert res.state_index[0, t] == k


def test_empirical_distribution_converges():
    m = model(4, 5)
    res = dynamics.run_chain(m, 0, dynamics.ChainConfig(steps=400_000, seed=SeededRng(1), record_every=4))
    emp = np.bincount(res.state_index[0], minlength=16) / res.state_index.shape[1]
    pi = oracles.gibbs(m.J, m.h)
    assert 0.5 * np.abs(emp - pi).sum() < 0.02


def test_continuous_time_chain():
    m = model(3, 6)
    res = dynamics.run_chain(m, [1, 1, 1], dynamics.ChainConfig(steps=20_000, seed=SeededRng(2),
                                                                time_model="continuous"))
    assert res.times[-1] == 20_000
    emp = np.bincount(res.state_index[0], minlength=8) / 20_000
    assert 0.5 * np.abs(emp - oracles.gibbs(m.J, m.h)).sum() < 0.03


def test_chain_validation(tmp_path):
    with pytest.raises(ValueError):
        dynamics.ChainConfig(steps=-1, seed=SeededRng(0))
    with pytest.raises(ValueError):
        dynamics.ChainConfig(steps=1, seed=SeededRng(0), time_model="warp")
    with pytest.raises(DimensionError):
        dynamics.run_chain(model(3, 0), [1, 1], dynamics.ChainConfig(steps=1, seed=SeededRng(0)))
    res = dynamics.run_chain(model(3, 0), 0, dynamics.ChainConfig(steps=9, seed=SeededRng(0)))
    path = tmp_path / "traj.csv"
    dynamics.write_trajectory_csv(path, res)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["step", "site", "magnetization"] and len(rows) == 4


def test_mixing_single_spin_closed_form():
    m = IsingModel(np.zeros((1, 1)), [0.0])
    # worst-start TV is exp(-t) / 2 in continuous time, exactly 0 after one discrete step
    mt = dynamics.mixing_time_exact(m, 0.01)
    assert mt.time == pytest.approx(math.log(50), abs=mt.resolution + 1e-12)
    assert mt.time >= math.log(50) - 1e-12
    assert dynamics.mixing_time_exact(m, 0.01, "discrete").time == 1.0


def test_uniformized_kernel_matches_expm():
    m = model(3, 7)
    L = oracles.heat_bath_generator(m.J, m.h)
    import scipy.linalg
    np.testing.assert_allclose(dynamics._uniformized_kernel(L, 3, 0.37), scipy.linalg.expm(0.37 * L), atol=1e-12)


def test_mixing_time_brackets_first_crossing():
    m = model(3, 8)
    eps = 0.05
    mt = dynamics.mixing_time_exact(m, eps)
    assert oracles.worst_tv_continuous(m.J, m.h, mt.time) <= eps + 1e-12
    assert oracles.worst_tv_continuous(m.J, m.h, mt.time - mt.resolution) > eps
    assert mt.monotone


def test_mixing_bounds():
    m = curie_weiss(6, 0.5)
    expected = ((1 + 2 * 0.5) * 6 + math.log(100)) / 0.5
    assert dynamics.mixing_bound_continuous(m, 0.01) == pytest.approx(expected)
    assert dynamics.mixing_bound_discrete(m, 0.01) == pytest.approx(6 * expected)
    with pytest.raises(CertificateUnavailable):
        dynamics.mixing_bound_continuous(curie_weiss(6, 1.2), 0.01)


def test_mixing_report():
    m = random_spread_model(5, 0.6, SeededRng(3))
    rep = dynamics.mixing_report(m, 0.01)
    assert rep.passed and rep.t_exact <= rep.t_bound_continuous
    assert rep.to_dict()["pass"] is True
    disc = dynamics.mixing_report(m, 0.01, "discrete")
    assert disc.t_exact == int(disc.t_exact) and disc.time_model == "discrete"
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            dynamics.mixing_report(m, bad)
    with pytest.raises(CapExceededError):
        dynamics.mixing_time_exact(IsingModel(np.zeros((11, 11)), np.zeros(11)), 0.1)
