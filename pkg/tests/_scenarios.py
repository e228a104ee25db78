"""Random scenario generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from csma_region import NodeProfile, SaturatingFrameSuccess, SystemParams, performance
from csma_region.model import FrameSuccessOne


def random_frame_success(rng):
    if rng.random() < 0.5:
        return FrameSuccessOne()
    return SaturatingFrameSuccess(c=float(rng.uniform(0.05, 0.5)), tau=float(rng.uniform(2, 30)))


def random_params(rng, n, b_range=(1.05, 20.0), noise_max=1.0, t0_max=5):
    t0 = int(rng.integers(1, t0_max + 1))
    return SystemParams(
        n=n,
        b=float(rng.uniform(*b_range)),
        noise_ratio=float(rng.uniform(0, noise_max)) if rng.random() < 0.7 else 0.0,
        t0=t0,
        rts_len=float(rng.uniform(0.05, 0.95) * t0),
    )


def random_periods(rng, n, equal=False, hi=50):
    if equal:
        return [int(rng.integers(1, hi + 1))] * n
    return [int(x) for x in rng.integers(1, hi + 1, size=n)]


def random_p(rng, n, alpha, side="better"):
    """Request vector with ``sum p`` below (``better``) or above (``worse``) ``1/alpha``."""
    cap = 1.0 / alpha
    while True:
        w = rng.dirichlet(np.full(n, 0.7))
        if side == "better":
            total = rng.uniform(0.02, min(n, cap))
        else:
            total = rng.uniform(cap, n)
        p = w * total
        if np.all(p <= 1.0) and np.all(p > 1e-6):
            return p


def with_demands(params, periods, successes, p):
    """Profiles whose demands are exactly the throughput produced by ``p``."""
    base = [NodeProfile(period=t, frame_success=fs) for t, fs in zip(periods, successes)]
    r = performance(p, params, base).throughput
    return [NodeProfile(period=t, demand=float(d), frame_success=fs) for t, d, fs in zip(periods, r, successes)]


def random_feasible(rng, n, equal_periods=False, side="better", **kw):
    """Random scenario whose demands are generated by a known request vector."""
    params = random_params(rng, n, **kw)
    periods = random_periods(rng, n, equal=equal_periods)
    successes = [random_frame_success(rng) for _ in range(n)]
    p = random_p(rng, n, params.alpha, side=side)
    return params, with_demands(params, periods, successes, p), p


def symmetric(n=2, b=3.0, period=10, demand=0.0, rts_len=0.2, noise_ratio=0.0, t0=1):
    params = SystemParams(n=n, b=b, noise_ratio=noise_ratio, t0=t0, rts_len=rts_len)
    return params, [NodeProfile(period=period, demand=demand) for _ in range(n)]
