"""Upper bounds on total power at the better equilibrium.

The bounds are stated in terms of three special functions of the capture
ratio ``b`` and node count ``n``:

* ``phi(b, n, x)``: total normalized grant at the request vector
  ``(1, x, ..., x)``;
* ``psi(b, n) = phi(b, n, 1/((n-1) b))``: the same at the corner where the
  requests sum to ``(b+1)/b``;
* ``gamma(b, n)``: total normalized grant at the uniform vector with the
  same sum.

Which one drives the bound depends on the RTS fraction ``beta`` relative to
two thresholds.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CaptureRatioTooSmall, DomainError, NoSignChange, TooManyNodes
from .metrics import total_power
from .model import NodeProfile, SystemParams, periods_of

LEMMA1_MAX_NODES = 4
LEMMA1_MIN_GRID = 200


def _check_bn(b, n: int, n_min: int = 2) -> None:
    if int(n) != n or n < n_min:
        raise DomainError(f"n must be an integer >= {n_min}, got {n!r}")
    if not np.all(np.asarray(b) > 1):
        raise DomainError("capture ratio must exceed 1")


def phi(b: float, n: int, x: float) -> float:
    _check_bn(b, n)
    x_max = 1.0 / ((n - 1) * b)
    if not (0.0 <= x <= x_max * (1 + 1e-12)):
        raise DomainError(f"phi is defined on [0, {x_max:.6g}], got x={x!r}")
    a = b / (1.0 + b)
    return (1.0 + (n - 1) * x - n * a * x) * (1.0 - a * x) ** (n - 2)


def psi(b, n: int):
    """Closed form of ``phi(b, n, 1/((n-1) b))``; vectorised over ``b``."""
    _check_bn(b, n)
    b = np.asarray(b, dtype=float)
    head = ((n - 1) * (1 + b) ** 2 - n * b) / (b * (1 + b) * (n - 1))
    base = (b * n + n - b - 2) / ((1 + b) * (n - 1))
    out = head * base ** (n - 2)
    return float(out) if out.ndim == 0 else out


def gamma(b: float, n: int) -> float:
    _check_bn(b, n, n_min=1)
    return (b + 1) / b * (1 - 1 / n) ** (n - 1)


class Regime(str, enum.Enum):
    LOW = "low"
    MID = "mid"
    HIGH = "high"


@dataclass(frozen=True)
class BoundReport:
    regime: Regime
    threshold_low: Optional[float]
    threshold_high: float
    bound: float
    extremal_p: Optional[np.ndarray]
    m_high: float
    m_low: float

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "threshold_low": self.threshold_low,
            "threshold_high": self.threshold_high,
            "bound": self.bound,
            "extremal_p": None if self.extremal_p is None else self.extremal_p.tolist(),
            "m_high": self.m_high,
            "m_low": self.m_low,
        }


def _ratio(m: float, g: float, k: float) -> float:
    # (m g + k) / (m g + 1): total power with normalized grant g and RTS term k
    return (m * g + k) / (m * g + 1.0)


def bound_pieces(b: float, n: int, beta: float, m_high: float, m_low: float) -> dict[Regime, float]:
    """The three candidate bound formulas, evaluated regardless of regime."""
    k_full = beta * (b + 1) / b
    return {
        Regime.LOW: _ratio(m_high, 1.0, beta),
        Regime.MID: _ratio(m_high, psi(b, n), k_full),
        Regime.HIGH: _ratio(m_low, gamma(b, n), k_full),
    }


def threshold_low(b: float, n: int, m_prime: float) -> float:
    s = m_prime * b * (1.0 - psi(b, n))
    return s / (1.0 + m_prime + s)


def extremal_points(b: float, n: int) -> dict[Regime, np.ndarray]:
    """Request vectors attaining each regime's bound (up to permutation)."""
    if n == 1:
        one = np.ones(1)
        return {Regime.LOW: one, Regime.MID: one, Regime.HIGH: one}
    low = np.zeros(n)
    low[0] = 1.0
    mid = np.full(n, 1.0 / ((n - 1) * b))
    mid[0] = 1.0
    high = np.full(n, (b + 1) / (n * b))
    return {Regime.LOW: low, Regime.MID: mid, Regime.HIGH: high}


def power_bound(params: SystemParams, profiles: Sequence[NodeProfile]) -> BoundReport:
    """Upper bound on total power over every feasible demand vector.

    Requires ``b > 2``. With unequal periods the largest period drives the
    low and mid pieces and the smallest period drives the high piece.
    """
    b, n = params.b, params.n
    if b <= 2:
        raise CaptureRatioTooSmall(f"power bounds need b > 2, got b={b!r}")
    periods = periods_of(profiles)
    if periods.shape != (n,):
        raise DomainError(f"expected {n} node profiles, got {periods.shape[0]}")
    cf = params.capture_factor
    m_high = float(periods.max()) / params.t0 * cf
    m_low = float(periods.min()) / params.t0 * cf
    beta = params.beta
    thr_high = b / (b + 1)
    equal = bool(np.all(periods == periods[0]))

    if n == 1:
        regime, thr_low = Regime.LOW, None
        bound = _ratio(m_high, 1.0, beta)
    else:
        thr_low = threshold_low(b, n, m_high)
        if beta <= thr_low:
            regime = Regime.LOW
        elif beta <= thr_high:
            regime = Regime.MID
        else:
            regime = Regime.HIGH
        bound = bound_pieces(b, n, beta, m_high, m_low)[regime]
    ext = extremal_points(b, n)[regime] if equal else None
    return BoundReport(regime, thr_low, thr_high, bound, ext, m_high, m_low)


def bound_tightness_check(params: SystemParams, profiles: Sequence[NodeProfile]) -> float:
    """Largest total power over the three candidate extremal vectors.

    Equals :func:`power_bound` when every node uses the same period.
    """
    if params.b <= 2:
        raise CaptureRatioTooSmall(f"power bounds need b > 2, got b={params.b!r}")
    periods = periods_of(profiles)
    if not np.all(periods == periods[0]):
        raise DomainError("tightness check needs equal periods")
    return max(total_power(p, params, profiles) for p in extremal_points(params.b, params.n).values())


# Symmetric network ----------------------------------------------------------


def symmetric_rho_hat(p, n: int, b: float, m_prime: float):
    """Effective per-node demand served when all ``n`` nodes request with ``p``."""
    a = b / (1.0 + b)
    g = m_prime * np.asarray(p, dtype=float) * (1 - a * np.asarray(p)) ** (n - 1)
    return g / (1 + n * g)


def symmetric_max_demand(params: SystemParams, profile: NodeProfile) -> tuple[float, float]:
    """Largest feasible common demand and the request probability reaching it.

    For ``n >= 2`` the maximum sits at ``p = (b+1)/(n b)`` where the total
    normalized grant equals ``gamma(b, n)``; a lone node peaks at ``p = 1``.
    """
    n, b = params.n, params.b
    m = profile.period / params.t0 * params.capture_factor
    if n == 1:
        return profile.success * m / (1 + m), 1.0
    g = m * gamma(b, n)
    return profile.success * g / (n * (1 + g)), (1 + b) / (n * b)


# Extremes of the total normalized grant at a fixed request sum -----------------


def sum_normalized_grants(P: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise ``sum_i p_i prod_{j != i} (1 - alpha p_j)``."""
    q = 1.0 - alpha * P
    return (P * np.prod(q, axis=-1, keepdims=True) / q).sum(axis=-1)


@dataclass(frozen=True)
class Lemma1Result:
    argmin: np.ndarray
    argmax: np.ndarray
    min: float
    max: float
    step: float

    def to_dict(self) -> dict:
        return {
            "argmin": self.argmin.tolist(),
            "argmax": self.argmax.tolist(),
            "min": self.min,
            "max": self.max,
            "step": self.step,
        }


def lemma1_oracle(n: int, b: float, C: float, grid: int = 240) -> Lemma1Result:
    """Brute-force extremes of the total normalized grant on ``sum p = C``.

    The first ``n - 1`` coordinates run over multiples of ``1/grid`` and the
    last absorbs the remainder, so every point lies exactly on the slice.
    """
    if int(n) != n or not 1 <= n <= LEMMA1_MAX_NODES:
        raise TooManyNodes(f"grid oracle supports 1 <= n <= {LEMMA1_MAX_NODES}, got {n!r}")
    if grid < LEMMA1_MIN_GRID:
        raise DomainError(f"grid must have at least {LEMMA1_MIN_GRID} points per axis")
    if not b > 1:
        raise DomainError(f"capture ratio must exceed 1, got {b!r}")
    if not (0 <= C <= (b + 1) / b * (1 + 1e-12)) or C > n:
        raise DomainError(f"C must lie in [0, min(n, (b+1)/b)], got {C!r}")
    a = b / (1 + b)
    axis = np.arange(grid + 1) / grid
    if n == 1:
        pt = np.array([C])
        v = float(sum_normalized_grants(pt, a))
        return Lemma1Result(pt, pt, v, v, 1.0 / grid)

    combos = list(itertools.product(axis, repeat=n - 2))
    inner = np.array(combos, dtype=float).reshape(len(combos), n - 2)
    best = {"min": (math.inf, None), "max": (-math.inf, None)}
    for x0 in axis:
        last = C - x0 - inner.sum(axis=1)
        keep = (last >= -1e-12) & (last <= 1 + 1e-12)
        if not keep.any():
            continue
        P = np.column_stack([np.full(keep.sum(), x0), inner[keep], np.clip(last[keep], 0, 1)])
        v = sum_normalized_grants(P, a)
        i, j = int(np.argmin(v)), int(np.argmax(v))
        if v[i] < best["min"][0]:
            best["min"] = (float(v[i]), P[i].copy())
        if v[j] > best["max"][0]:
            best["max"] = (float(v[j]), P[j].copy())
    return Lemma1Result(best["min"][1], best["max"][1], best["min"][0], best["max"][0], 1.0 / grid)


def lemma1_stated_points(n: int, b: float, C: float) -> dict[str, list[np.ndarray]]:
    """Closed-form minimiser and candidate maximisers (representatives only)."""
    minimum = [np.full(n, C / n)]
    if C <= 1:
        first = np.zeros(n)
        first[0] = C
        maxima = [first]
    else:
        maxima = []
        for k in range(1, n):
            pt = np.zeros(n)
            pt[0] = 1.0
            pt[1 : k + 1] = (C - 1) / k
            maxima.append(pt)
    return {"min": minimum, "max": maxima}


# Threshold search -----------------------------------------------------------


def psi_gap(b, i: int):
    return psi(b, i + 1) - psi(b, i)


def _scan_grid(step: float, upper: float) -> np.ndarray:
    count = int(round((upper - 1.0) / step))
    return 1.0 + step * np.arange(1, count + 1)


def psi_gap_sign_changes(i: int, step: float = 1e-3, upper: float = 100.0) -> list[float]:
    """Scan points just after which ``psi(b, i+1) - psi(b, i)`` changes sign.

    Exact zeros on the scan are skipped, so a crossing that lands on a scan
    point is counted once.
    """
    bs = _scan_grid(step, upper)
    s = np.sign(psi_gap(bs, i))
    nz = np.nonzero(s)[0]
    flips = np.nonzero(s[nz[1:]] != s[nz[:-1]])[0]
    return [float(bs[nz[k]]) for k in flips]


def zeta_search(i: int, tol: float = 1e-9, step: float = 1e-3, upper: float = 100.0) -> float:
    """Capture ratio above which ``psi(b, i+1) > psi(b, i)`` on the scan.

    Scans ``(1, upper]`` with ``step``, takes the last point where the gap is
    non-positive and bisects the crossing to ``tol``. The value returned is
    the bracket end where the gap is still non-positive.
    """
    if int(i) != i or i < 2:
        raise DomainError(f"i must be an integer >= 2, got {i!r}")
    bs = _scan_grid(step, upper)
    gap = psi_gap(bs, i)
    nonpos = np.nonzero(gap <= 0)[0]
    if nonpos.size == 0:
        raise NoSignChange(f"psi gap positive on the whole scan for i={i}", lower_limit=float(bs[0]))
    k = int(nonpos[-1])
    if k == bs.size - 1:
        raise DomainError(f"psi gap is not positive at the scan limit b={upper} for i={i}")
    lo, hi = float(bs[k]), float(bs[k + 1])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if psi_gap(mid, i) <= 0:
            lo = mid
        else:
            hi = mid
    return lo
