"""Constrained Nash-equilibrium solver and feasibility queries.

At an equilibrium every node satisfies

    target_i = p_i * prod_{j != i} (1 - alpha p_j),
    target_i = exp(b N0/PT) * T0 * rho_hat_i / (T_i (1 - rho_t)),

and the request probability of every node is a monotone function of the
request probability of the node with the largest target (the leader).
Substituting that map reduces the system to one scalar equation
``log_grant(p_lead) = ln target_lead`` whose left side is unimodal with its
mode where ``sum_j p_j = 1/alpha``. The increasing side holds the better
equilibrium, the decreasing side the worse one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InvalidInput, NoConvergence, NotAnEquilibrium
from .metrics import performance
from .model import NodeProfile, SystemParams, as_request_vector, validate

MAX_BISECTIONS = 200
RESIDUAL_TOL = 1e-10
# Log-space slack for the closed region boundary: demands computed at the
# symmetric maximum land within rounding of the mode value.
BOUNDARY_SLACK = 1e-12


class Branch(str, enum.Enum):
    BETTER = "better"
    WORSE = "worse"


@dataclass(frozen=True)
class Equilibrium:
    p: np.ndarray
    branch: Branch
    residual: float
    sum_p: float

    def to_dict(self) -> dict:
        return {
            "p": self.p.tolist(),
            "branch": self.branch.value,
            "residual": self.residual,
            "sum_p": self.sum_p,
        }


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    better: Optional[Equilibrium]
    worse: Optional[Equilibrium]
    margin: float
    leader: int
    mode: float

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "better": None if self.better is None else self.better.to_dict(),
            "worse": None if self.worse is None else self.worse.to_dict(),
            "margin": self.margin if math.isfinite(self.margin) else None,
            "leader": self.leader,
            "mode": self.mode,
        }


def reduced_targets(params: SystemParams, profiles: Sequence[NodeProfile]) -> tuple[np.ndarray, int]:
    """Per-node targets of the reduced equations and the leader index.

    The leader is the first index attaining the largest target.
    """
    dc = validate(params, profiles)
    targets = params.t0 * dc.rho_hat / (dc.periods * (1.0 - dc.rho_t) * dc.capture_factor)
    return targets, int(np.argmax(targets))


def _ratios(targets: np.ndarray, leader: int) -> np.ndarray:
    top = targets[leader]
    if top <= 0:
        return np.zeros_like(targets)
    return targets / top


def _followers(p_lead, ratios: np.ndarray, alpha: float, leader: int) -> np.ndarray:
    """Vectorised follower map; returns shape ``p_lead.shape + (n,)``."""
    x = np.asarray(p_lead, dtype=float)[..., None]
    p = ratios * x / (1.0 - alpha * x + alpha * ratios * x)
    p[..., leader] = x[..., 0]
    return p


def follower_map(p_star: float, targets, alpha: float, leader: int | None = None) -> np.ndarray:
    """Request vector implied by the leader's request probability ``p_star``.

    ``p_j = r_j p / (1 - alpha p + alpha r_j p)`` with ``r_j = target_j /
    target_lead``. Each ``p_j <= p_star``; zero targets map to zero.
    """
    if not 0.0 <= p_star <= 1.0:
        raise InvalidInput(f"p_star must lie in [0, 1], got {p_star!r}")
    targets = np.asarray(targets, dtype=float)
    if leader is None:
        leader = int(np.argmax(targets))
    return _followers(p_star, _ratios(targets, leader), alpha, leader)


def _log_grant(p_lead, ratios, alpha, leader):
    p = _followers(p_lead, ratios, alpha, leader)
    logs = np.log1p(-alpha * p)
    logs[..., leader] = 0.0
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p_lead, dtype=float)) + logs.sum(axis=-1)


def log_grant_curve(params: SystemParams, profiles: Sequence[NodeProfile], num: int = 10_000):
    """Sample the leader's log-grant function on ``num`` points of (0, 1].

    Returns ``(grid, values)``. On the equilibrium manifold this function is
    unimodal, which is what makes the two-branch bisection valid.
    """
    targets, leader = reduced_targets(params, profiles)
    grid = np.linspace(1.0 / num, 1.0, num)
    return grid, _log_grant(grid, _ratios(targets, leader), params.alpha, leader)


def _reduced_residual(p: np.ndarray, targets: np.ndarray, alpha: float) -> float:
    q = 1.0 - alpha * p
    return float(np.max(np.abs(p * np.prod(q) / q - targets)))


def _bisect(f, lo: float, hi: float) -> float:
    """Bisection for a sign change of ``f`` with ``f(lo) <= 0 <= f(hi)``.

    Works for decreasing ``f`` too if the caller swaps the endpoints. Stops
    once the midpoint is no longer strictly between the endpoints.
    """
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            return hi if abs(f(hi)) <= abs(f(lo)) else lo
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    raise NoConvergence(f"bisection did not converge within {MAX_BISECTIONS} iterations")


def _find_mode(ratios: np.ndarray, alpha: float, leader: int) -> float:
    def excess(x):
        return float(_followers(x, ratios, alpha, leader).sum()) - 1.0 / alpha

    if excess(1.0) <= 0:
        return 1.0
    return _bisect(excess, 0.0, 1.0)


def _make_equilibrium(p, branch, params, profiles) -> Equilibrium:
    perf = performance(p, params, profiles)
    demands = np.array([pr.demand for pr in profiles])
    return Equilibrium(
        p=p,
        branch=branch,
        residual=float(np.max(np.abs(perf.throughput - demands))),
        sum_p=float(p.sum()),
    )


def solve(params: SystemParams, profiles: Sequence[NodeProfile], want_worse: bool = False) -> FeasibilityVerdict:
    """Solve the equilibrium equations for the profiles' demands.

    Returns the better equilibrium (``sum p <= (b+1)/b``) whenever the
    demands are feasible and, if ``want_worse``, the worse one when it lies
    inside the unit cube.
    """
    targets, leader = reduced_targets(params, profiles)
    alpha = params.alpha
    n = params.n
    t_lead = float(targets[leader])
    if t_lead == 0.0:
        zero = _make_equilibrium(np.zeros(n), Branch.BETTER, params, profiles)
        return FeasibilityVerdict(True, zero, None, math.inf, leader, 1.0)

    ratios = _ratios(targets, leader)
    mode = _find_mode(ratios, alpha, leader)
    log_t = math.log(t_lead)

    def gap(x):
        return float(_log_grant(x, ratios, alpha, leader)) - log_t

    margin = gap(mode)
    if margin < -BOUNDARY_SLACK:
        return FeasibilityVerdict(False, None, None, margin, leader, mode)

    def finish(x, branch):
        p = _followers(x, ratios, alpha, leader)
        res = _reduced_residual(p, targets, alpha)
        if res > RESIDUAL_TOL:
            raise NoConvergence(f"{branch.value} equilibrium residual {res:.3e} exceeds {RESIDUAL_TOL}")
        return _make_equilibrium(p, branch, params, profiles)

    if margin <= BOUNDARY_SLACK:
        better = finish(mode, Branch.BETTER)
        worse = finish(mode, Branch.WORSE) if want_worse and mode < 1.0 else None
        return FeasibilityVerdict(True, better, worse, margin, leader, mode)

    # log_grant(x) <= ln x, so the leader's own target brackets from below
    u = _bisect(lambda v: gap(math.exp(v)), math.log(t_lead), math.log(mode))
    better = finish(min(math.exp(u), mode), Branch.BETTER)

    worse = None
    if want_worse and mode < 1.0 and gap(1.0) <= 0:
        x = _bisect(lambda v: -gap(v), mode, 1.0)
        worse = finish(x, Branch.WORSE)
    return FeasibilityVerdict(True, better, worse, margin, leader, mode)


def region_membership(params: SystemParams, profiles: Sequence[NodeProfile]) -> bool:
    return solve(params, profiles).feasible


def successive_update_iter(
    params: SystemParams,
    profiles_from: Sequence[NodeProfile],
    profiles_to: Sequence[NodeProfile],
    p0,
    tol: float = 1e-12,
    max_sweeps: int = 1_000_000,
) -> Iterator[np.ndarray]:
    """Yield the request vector after each Gauss-Seidel sweep.

    Each coordinate is re-solved from its own equation with the others held
    at their latest values. Starting from an equilibrium of ``profiles_from``
    and moving to targets that are no larger, every coordinate decreases
    monotonically towards an equilibrium of ``profiles_to``.
    """
    n = params.n
    p = as_request_vector(p0, n).copy()
    alpha = params.alpha
    t_from, _ = reduced_targets(params, profiles_from)
    res = _reduced_residual(p, t_from, alpha)
    if res > 1e-9:
        raise NotAnEquilibrium(f"p0 residual {res:.3e} exceeds 1e-9 for the initial periods")
    if any(b.period < a.period for a, b in zip(profiles_from, profiles_to)):
        raise InvalidInput("successive update needs T'_i >= T_i for every node")
    t_to, _ = reduced_targets(params, profiles_to)
    if np.any(t_to > t_from * (1 + 1e-12) + 1e-300):
        raise InvalidInput("successive update needs reduced targets that do not increase")

    q = 1.0 - alpha * p
    for _ in range(max_sweeps):
        prev = p.copy()
        for i in range(n):
            q[i] = 1.0
            p[i] = t_to[i] / np.prod(q)
            q[i] = 1.0 - alpha * p[i]
        yield p.copy()
        if np.max(prev - p) < tol:
            return
    raise NoConvergence(f"successive update did not settle within {max_sweeps} sweeps")


def successive_update(params, profiles_from, profiles_to, p0, tol: float = 1e-12) -> np.ndarray:
    p = as_request_vector(p0, params.n).copy()
    for p in successive_update_iter(params, profiles_from, profiles_to, p0, tol=tol):
        pass
    return p
