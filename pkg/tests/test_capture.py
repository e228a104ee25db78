import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csma_region import SystemParams, conditional_capture, grant_oracle_enum, grant_probabilities
from csma_region.errors import DomainError, TooManyNodes


def test_conditional_capture_lone_requester():
    assert conditional_capture(1, 3, 0) == 1.0


def test_conditional_capture_two_requesters():
    assert conditional_capture(2, 3, 0) == 0.25


def test_conditional_capture_vectorised():
    np.testing.assert_allclose(conditional_capture(np.array([1, 2, 3]), 3.0), [1, 0.25, 1 / 16], rtol=1e-15)


def test_conditional_capture_rejects_bad_input():
    with pytest.raises(DomainError):
        conditional_capture(0, 3)
    with pytest.raises(DomainError):
        conditional_capture(2, 1.0)


def test_conditional_capture_monte_carlo():
    # three requesters with unit-mean exponential fading, 10^7 draws
    b, noise, s = 3.0, 0.1, 3
    expected = math.exp(-0.3) / 16
    assert conditional_capture(s, b, noise) == pytest.approx(expected, rel=1e-15)
    rng = np.random.default_rng(20240501)
    hits, total = 0, 0
    for _ in range(10):
        h = rng.exponential(size=(1_000_000, s))
        hits += int(np.count_nonzero(h[:, 0] > b * (noise + h[:, 1] + h[:, 2])))
        total += h.shape[0]
    est = hits / total
    se = math.sqrt(expected * (1 - expected) / total)
    assert abs(est - expected) < 4 * se


def test_grant_symmetric_pair():
    params = SystemParams(n=2, b=3)
    np.testing.assert_allclose(grant_probabilities([0.5, 0.5], params), [0.3125, 0.3125], atol=1e-15)
    np.testing.assert_allclose(grant_oracle_enum([0.5, 0.5], params), [0.3125, 0.3125], atol=1e-15)


def test_grant_both_always_request():
    params = SystemParams(n=2, b=3)
    np.testing.assert_allclose(grant_oracle_enum([1, 1], params), [0.25, 0.25], atol=1e-15)
    np.testing.assert_allclose(grant_probabilities([1, 1], params), [0.25, 0.25], atol=1e-15)


def test_grant_single_node():
    assert grant_probabilities([1.0], SystemParams(n=1, b=3)).tolist() == [1.0]


def test_grant_zero_requests():
    params = SystemParams(n=5, b=2)
    assert grant_probabilities(np.zeros(5), params).tolist() == [0.0] * 5
    assert grant_oracle_enum(np.zeros(5), params).tolist() == [0.0] * 5
    g = grant_probabilities([0.3, 0.0, 0.7, 0.0, 0.2], params)
    assert g[1] == 0.0 and g[3] == 0.0


def test_oracle_matches_closed_form_small_n():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        params = SystemParams(n=n, b=float(rng.uniform(1.01, 20)), noise_ratio=float(rng.uniform(0, 2)))
        p = rng.random(n)
        np.testing.assert_allclose(grant_oracle_enum(p, params), grant_probabilities(p, params), rtol=0, atol=1e-12)


def test_oracle_node_limit():
    with pytest.raises(TooManyNodes):
        grant_oracle_enum(np.full(21, 0.1), SystemParams(n=21, b=3))


def test_large_network_log_space_path():
    n = 200
    params = SystemParams(n=n, b=3)
    p = np.full(n, 0.01)
    expected = 0.01 * (1 - 0.75 * 0.01) ** (n - 1)
    np.testing.assert_allclose(grant_probabilities(p, params), expected, rtol=1e-12)


def _instance(draw_n=st.integers(1, 8)):
    return st.tuples(
        draw_n,
        st.floats(1.01, 20),
        st.floats(0, 2),
        st.integers(0, 2**32 - 1),
    )


@settings(max_examples=150, deadline=None)
@given(_instance())
def test_grant_in_range_and_sum_bounded(inst):
    n, b, noise, seed = inst
    params = SystemParams(n=n, b=b, noise_ratio=noise)
    p = np.random.default_rng(seed).random(n)
    g = grant_probabilities(p, params)
    assert np.all(g >= 0) and np.all(g <= p + 1e-15)
    assert g.sum() <= params.capture_factor + 1e-12


@settings(max_examples=150, deadline=None)
@given(_instance(st.integers(2, 8)))
def test_grant_permutation_equivariant(inst):
    n, b, noise, seed = inst
    params = SystemParams(n=n, b=b, noise_ratio=noise)
    rng = np.random.default_rng(seed)
    p = rng.random(n)
    perm = rng.permutation(n)
    np.testing.assert_allclose(grant_probabilities(p[perm], params), grant_probabilities(p, params)[perm], atol=1e-15)


@settings(max_examples=150, deadline=None)
@given(_instance(st.integers(2, 8)), st.floats(0.01, 0.5))
def test_grant_monotone(inst, bump):
    n, b, noise, seed = inst
    params = SystemParams(n=n, b=b, noise_ratio=noise)
    p = np.random.default_rng(seed).random(n) * 0.5
    g = grant_probabilities(p, params)
    q = p.copy()
    q[0] += bump
    h = grant_probabilities(q, params)
    assert h[0] >= g[0]
    assert np.all(h[1:] <= g[1:])
