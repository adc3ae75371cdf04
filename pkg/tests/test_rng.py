import math

import numpy as np
import pytest
from scipy import stats

from isinggap.rng import SeededRng, splitmix64


def test_splitmix64_reference_value():
    # first output of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_same_seed_same_stream():
    a, b = SeededRng(5), SeededRng(5)
    np.testing.assert_array_equal(a.uniform(100), b.uniform(100))
    np.testing.assert_array_equal(a.normal(7), b.normal(7))
    np.testing.assert_array_equal(a.poisson(3.0, 10), b.poisson(3.0, 10))


def test_children_are_distinct_and_reproducible():
    r = SeededRng(5)
    kids = [r.child(k) for k in range(4)]
    assert len({k.stream for k in kids}) == 4
    np.testing.assert_array_equal(kids[2].uniform(5), SeededRng(5).child(2).uniform(5))
    assert not np.array_equal(kids[0].uniform(5), kids[1].uniform(5))
    assert r.child(0).child(0).stream != r.child(0).stream


def test_normal_is_box_muller_of_uniforms():
    u = SeededRng(9).uniform(4)
    z = SeededRng(9).normal(3)
    r0 = math.sqrt(-2 * math.log(1 - u[0]))
    assert z[0] == pytest.approx(r0 * math.cos(2 * math.pi * u[1]))
    assert z[1] == pytest.approx(r0 * math.sin(2 * math.pi * u[1]))
    r1 = math.sqrt(-2 * math.log(1 - u[2]))
    assert z[2] == pytest.approx(r1 * math.cos(2 * math.pi * u[3]))


def test_normal_distribution():
    z = SeededRng(1).normal(200_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.01


def test_integers_and_permutation():
    r = SeededRng(3)
    k = r.integers(7, 70_000)
    assert k.min() == 0 and k.max() == 6
    counts = np.bincount(k, minlength=7)
    assert stats.chisquare(counts).pvalue > 1e-3
    p = r.permutation(np.arange(10))
    assert sorted(p.tolist()) == list(range(10))
    assert r.permutation(np.arange(1)).tolist() == [0]


def test_permutation_uniform_over_small_set():
    r = SeededRng(4)
    counts = {}
    for _ in range(6000):
        key = tuple(r.permutation(np.arange(3)))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3
