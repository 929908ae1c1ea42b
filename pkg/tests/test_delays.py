import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ftconsensus.delays import DelayModel, sample_delay


def test_zero_bound_and_self_links():
    assert sample_delay(DelayModel(0, seed=3), (0, 1), 17) == 0
    m = DelayModel(7, seed=3)
    assert all(sample_delay(m, (2, 2), k) == 0 for k in range(200))


def test_same_query_same_value():
    m = DelayModel(9, seed=11)
    assert [sample_delay(m, (3, 4), k) for k in range(50)] == [sample_delay(m, (3, 4), k) for k in range(50)]


def test_vectorised_matches_scalar():
    m = DelayModel(5, seed=2)
    src = np.array([0, 1, 2, 3, 4])
    dst = np.array([1, 2, 3, 4, 0])
    vec = m.sample(src, dst, 42)
    assert vec.tolist() == [sample_delay(m, (i, j), 42) for i, j in zip(src, dst)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 30), st.integers(0, 2**63), st.integers(0, 10**6))
def test_range(tau_bar, seed, tick):
    m = DelayModel(tau_bar, seed=seed)
    src = np.arange(40) % 7
    dst = (np.arange(40) * 3 + 1) % 7
    d = m.sample(src, dst, tick)
    assert d.min() >= 0 and d.max() <= tau_bar
    assert np.all(d[src == dst] == 0)


def test_uniform_histogram():
    m = DelayModel(5, seed=1)
    ticks = np.arange(60000)
    d = m.sample(np.zeros_like(ticks), np.ones_like(ticks), ticks)
    counts = np.bincount(d, minlength=6)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_seeds_differ():
    a = DelayModel(10, seed=1).sample(np.zeros(200, int), np.ones(200, int), 0)
    b = DelayModel(10, seed=2).sample(np.zeros(200, int), np.ones(200, int), 0)
    assert not np.array_equal(a, b)


def test_constant_and_table():
    assert sample_delay(DelayModel(4, "constant"), (0, 1), 9) == 4
    t = DelayModel(6, "table", seed=5, edge_bounds={(0, 1): 1})
    assert {sample_delay(t, (0, 1), k) for k in range(300)} <= {0, 1}
    assert max(sample_delay(t, (1, 0), k) for k in range(300)) == 6


def test_invalid_models():
    with pytest.raises(ValueError):
        DelayModel(-1)
    with pytest.raises(ValueError):
        DelayModel(2, "poisson")
    with pytest.raises(ValueError):
        DelayModel(2, "table", edge_bounds={(0, 1): 3})
