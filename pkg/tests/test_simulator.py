import numpy as np
import pytest

from csma_region import NodeProfile, SimConfig, SystemParams, capture_trial, performance, simulate
from csma_region.errors import InvalidScenario, MultipleWinners
from csma_region.simulator import _winners

from _scenarios import random_feasible, symmetric


def _close(est, ref, se, k):
    return np.all(np.abs(est - ref) <= np.maximum(k * se, 1e-12))


def test_single_node_always_transmitting():
    params = SystemParams(n=1, b=3)
    profiles = [NodeProfile(period=10)]
    rep = simulate(params, profiles, [1.0], SimConfig(slots=1_000_000, seed=7))
    assert _close(rep.throughput, 10 / 11, rep.stderr["throughput"], 3)
    assert rep.grants[0] == 1.0
    # truncation keeps only complete cycles
    assert rep.slots == 11 * (1_000_000 // 11)


def test_zero_requests_give_exact_zeros():
    params, profiles = symmetric(n=3)
    rep = simulate(params, profiles, np.zeros(3), SimConfig(handshakes=50_000))
    assert rep.throughput.tolist() == [0.0] * 3
    assert rep.power.tolist() == [0.0] * 3
    assert rep.grants.tolist() == [0.0] * 3


def test_symmetric_grant_rate():
    params, profiles = symmetric()
    rep = simulate(params, profiles, [0.5, 0.5], SimConfig(handshakes=1_000_000, seed=42))
    assert rep.handshakes == 1_000_000
    assert _close(rep.grants, 0.3125, rep.stderr["grants"], 3)
    perf = performance([0.5, 0.5], params, profiles)
    assert _close(rep.throughput, perf.throughput, rep.stderr["throughput"], 3)
    assert _close(rep.power, perf.power, rep.stderr["power"], 3)


def test_random_scenarios_against_closed_forms():
    rng = np.random.default_rng(31)
    for k in range(4):
        params, profiles, p = random_feasible(rng, int(rng.integers(1, 6)))
        rep = simulate(params, profiles, p, SimConfig(handshakes=200_000, seed=k))
        perf = performance(p, params, profiles)
        for field in ("grants", "throughput", "power"):
            assert _close(getattr(rep, field), getattr(perf, field), rep.stderr[field], 4), field


def test_bit_reproducible_across_runs_and_workers():
    params, profiles = symmetric(n=3, b=2.5, noise_ratio=0.05)
    cfg = SimConfig(slots=200_000, seed=123, replications=4)
    a = simulate(params, profiles, [0.3, 0.4, 0.5], cfg)
    b = simulate(params, profiles, [0.3, 0.4, 0.5], cfg)
    c = simulate(params, profiles, [0.3, 0.4, 0.5], cfg, workers=3)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    d = simulate(params, profiles, [0.3, 0.4, 0.5], SimConfig(slots=200_000, seed=124, replications=4))
    assert d.to_dict() != a.to_dict()


def test_replications_pool_counts():
    params, profiles = symmetric()
    rep = simulate(params, profiles, [0.5, 0.5], SimConfig(handshakes=10_000, replications=3))
    assert rep.handshakes == 30_000


def test_report_field_names_match_performance():
    params, profiles = symmetric()
    rep = simulate(params, profiles, [0.5, 0.5], SimConfig(handshakes=5000)).to_dict()
    perf = performance([0.5, 0.5], params, profiles).to_dict()
    assert {"grants", "throughput", "power"} <= set(perf) & set(rep)
    assert {"stderr", "handshakes"} <= set(rep)


def test_capture_trial_examples():
    params = SystemParams(n=3, b=3)
    rng = np.random.default_rng(0)
    assert capture_trial([False, True, False], params, rng) == 1
    assert capture_trial([False, False, False], params, rng) is None
    with pytest.raises(InvalidScenario):
        capture_trial([True], params, rng)


def test_capture_trial_two_requesters():
    params = SystemParams(n=2, b=3)
    rng = np.random.default_rng(5)
    trials = 100_000
    wins = np.zeros(3)
    for _ in range(trials):
        w = capture_trial([True, True], params, rng)
        wins[2 if w is None else w] += 1
    se = np.sqrt(0.25 * 0.75 / trials)
    assert np.all(np.abs(wins[:2] / trials - 0.25) < 4 * se)


def test_vectorised_capture_two_requesters():
    rng = np.random.default_rng(6)
    h = rng.exponential(size=(1_000_000, 2))
    w = _winners(h, 3.0, 0.0)
    frac = np.bincount(w + 1, minlength=3)[1:] / h.shape[0]
    se = np.sqrt(0.25 * 0.75 / h.shape[0])
    assert np.all(np.abs(frac - 0.25) < 4 * se)


def test_multiple_winners_is_fatal():
    # a capture ratio below one would allow two winners; the guard must fire
    with pytest.raises(MultipleWinners):
        _winners(np.array([[1.0, 1.0]]), 0.5, 0.0)


def test_config_validation():
    for kw in ({"slots": 0}, {"replications": 0}, {"handshakes": 0}, {"seed": -1}):
        with pytest.raises(InvalidScenario):
            SimConfig(**kw)
    params, profiles = symmetric(t0=5, rts_len=1.0)
    with pytest.raises(InvalidScenario):
        simulate(params, profiles, [0.5, 0.5], SimConfig(slots=3))
