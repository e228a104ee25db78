"""Slot-level Monte Carlo of the RTS/CTS protocol with SINR capture.

Every handshake phase lasts ``t0`` slots. Each node requests independently
with probability ``p_i``; requesters draw unit-mean exponential channel
powers and the base station grants the (at most one) requester whose SINR
exceeds ``b``. A granted node then holds the channel for ``T_i`` slots and
its frame succeeds with probability ``Ps_i(T_i)``.

Random numbers come from Philox streams keyed by ``(seed, replication,
block)`` where a block is a fixed run of ``BLOCK`` phases, so the result does
not depend on how replications are scheduled across threads. Standard
errors are computed from the per-block totals with the usual linearisation
of a ratio estimator.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidScenario, MultipleWinners
from .model import NodeProfile, SystemParams, as_request_vector, check_profiles, periods_of, success_of

BLOCK = 4096


@dataclass(frozen=True)
class SimConfig:
    """Run length and seeding.

    ``slots`` is the simulated horizon per replication; a cycle that would
    run past it is dropped. If ``handshakes`` is given it overrides
    ``slots`` and each replication runs exactly that many handshake phases.
    """

    slots: int = 1_000_000
    seed: int = 0
    replications: int = 1
    handshakes: Optional[int] = None

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidScenario("replications must be positive")
        if self.handshakes is None and self.slots < 1:
            raise InvalidScenario("slots must be positive")
        if self.handshakes is not None and self.handshakes < 1:
            raise InvalidScenario("handshakes must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidScenario("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimReport:
    grants: np.ndarray
    throughput: np.ndarray
    power: np.ndarray
    stderr: dict
    handshakes: int
    slots: float

    def to_dict(self) -> dict:
        return {
            "grants": self.grants.tolist(),
            "throughput": self.throughput.tolist(),
            "power": self.power.tolist(),
            "stderr": {k: v.tolist() for k, v in self.stderr.items()},
            "handshakes": self.handshakes,
            "slots": self.slots,
        }


def _winners(h: np.ndarray, b: float, noise_ratio: float) -> np.ndarray:
    """Index of the captured requester per row of fading powers, -1 if none.

    ``h`` holds the channel power of each requester and 0 for silent nodes.
    """
    total = h.sum(axis=-1, keepdims=True)
    interference = noise_ratio + total - h
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(h > 0, h / interference, 0.0)
    captured = sinr > b
    count = captured.sum(axis=-1)
    if np.any(count > 1):
        raise MultipleWinners("more than one RTS exceeded the capture ratio")
    return np.where(count == 1, np.argmax(captured, axis=-1), -1)


def capture_trial(request_mask, params: SystemParams, rng: np.random.Generator) -> Optional[int]:
    """Resolve one handshake phase; returns the granted index or ``None``."""
    mask = np.asarray(request_mask, dtype=bool)
    if mask.shape != (params.n,):
        raise InvalidScenario(f"request mask must have {params.n} entries")
    h = rng.exponential(size=params.n) * mask
    w = int(_winners(h, params.b, params.noise_ratio))
    return None if w < 0 else w


def _block_rng(seed: int, rep: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(rep, block))
    return np.random.Generator(np.random.Philox(ss))


def _run_replication(rep, params, p, periods, success, cfg):
    """Return per-block totals: phases, slots, requests, grants, packets."""
    n = params.n
    rows = []
    remaining_phases = cfg.handshakes
    elapsed = 0.0
    block = 0
    while True:
        size = BLOCK if remaining_phases is None else min(BLOCK, remaining_phases)
        if size <= 0:
            break
        rng = _block_rng(cfg.seed, rep, block)
        req = rng.random((size, n)) < p
        h = rng.exponential(size=(size, n)) * req
        ok = rng.random(size)
        win = _winners(h, params.b, params.noise_ratio)
        granted = win >= 0
        w = np.where(granted, win, 0)
        duration = params.t0 + np.where(granted, periods[w], 0.0)
        delivered = granted & (ok < success[w])

        stop = False
        if remaining_phases is None:
            ends = elapsed + np.cumsum(duration)
            keep = int(np.searchsorted(ends, cfg.slots, side="right"))
            if keep < size:
                stop = True
                req, win, granted, w, duration, delivered = (
                    a[:keep] for a in (req, win, granted, w, duration, delivered)
                )
                size = keep
        else:
            remaining_phases -= size

        grants = np.bincount(w[granted], minlength=n).astype(float)
        packets = np.bincount(w[delivered], minlength=n) * periods
        rows.append((size, float(duration.sum()), req.sum(axis=0).astype(float), grants, packets))
        elapsed += float(duration.sum())
        block += 1
        if stop:
            break
    return rows


def _ratio_stats(num: np.ndarray, den: np.ndarray):
    """Pooled ratio and its linearised standard error over blocks."""
    est = num.sum(axis=0) / den.sum()
    k = den.shape[0]
    if k < 2:
        return est, np.full_like(est, math.nan)
    resid = num - est * den[:, None]
    se = np.sqrt((resid**2).sum(axis=0) / (k * (k - 1))) / den.mean()
    return est, se


def simulate(
    params: SystemParams,
    profiles: Sequence[NodeProfile],
    p,
    cfg: SimConfig,
    workers: int = 1,
) -> SimReport:
    """Run ``cfg.replications`` independent replications and pool them."""
    check_profiles(params, profiles)
    p = as_request_vector(p, params.n)
    if cfg.handshakes is None and cfg.slots < params.t0:
        raise InvalidScenario("slots must be at least t0")
    periods = periods_of(profiles)
    success = success_of(profiles)
    reps = range(cfg.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _run_replication(r, params, p, periods, success, cfg), reps))
    else:
        results = [_run_replication(r, params, p, periods, success, cfg) for r in reps]

    rows = [row for rep_rows in results for row in rep_rows if row[0] > 0]
    if not rows:
        raise InvalidScenario("horizon too short for a single complete cycle")
    phases = np.array([r[0] for r in rows], dtype=float)
    slots = np.array([r[1] for r in rows])
    requests = np.array([r[2] for r in rows])
    grants = np.array([r[3] for r in rows])
    packets = np.array([r[4] for r in rows])
    airtime = requests * params.rts_len + grants * periods

    grant_rate, grant_se = _ratio_stats(grants, phases)
    thr, thr_se = _ratio_stats(packets, slots)
    pw, pw_se = _ratio_stats(airtime, slots)
    return SimReport(
        grants=grant_rate,
        throughput=thr,
        power=pw,
        stderr={"grants": grant_se, "throughput": thr_se, "power": pw_se},
        handshakes=int(phases.sum()),
        slots=float(slots.sum()),
    )
