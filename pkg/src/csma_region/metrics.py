"""Steady-state throughput and power for a request vector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .capture import grant_probabilities
from .errors import NotAtEquilibrium
from .model import (
    NodeProfile,
    SystemParams,
    as_request_vector,
    check_profiles,
    periods_of,
    success_of,
    validate,
)

EQUILIBRIUM_TOL = 1e-9


@dataclass(frozen=True)
class Performance:
    throughput: np.ndarray
    power: np.ndarray
    cycle_data_fraction: float
    grants: np.ndarray

    def to_dict(self) -> dict:
        return {
            "throughput": self.throughput.tolist(),
            "power": self.power.tolist(),
            "cycle_data_fraction": self.cycle_data_fraction,
            "grants": self.grants.tolist(),
        }


def performance(p, params: SystemParams, profiles: Sequence[NodeProfile]) -> Performance:
    """Throughput and normalized power of every node at request vector ``p``.

    ``r_i = Ps_i G_i T_i / D`` and ``S_i = (p_i rts_len + G_i T_i) / D`` with the
    shared cycle length ``D = T0 + sum_j G_j T_j``. Works for any ``p``, not
    only equilibria.
    """
    check_profiles(params, profiles)
    p = as_request_vector(p, params.n)
    periods = periods_of(profiles)
    g = grant_probabilities(p, params)
    data = g * periods
    denom = params.t0 + data.sum()
    return Performance(
        throughput=success_of(profiles) * data / denom,
        power=(p * params.rts_len + data) / denom,
        cycle_data_fraction=float(data.sum() / denom),
        grants=g,
    )


def equilibrium_residual(p, params: SystemParams, profiles: Sequence[NodeProfile]) -> float:
    """Max violation of ``G_i(p) = T0 rho_hat_i / (T_i (1 - rho_t))`` over nodes."""
    dc = validate(params, profiles)
    p = as_request_vector(p, params.n)
    target = params.t0 * dc.rho_hat / (dc.periods * (1.0 - dc.rho_t))
    return float(np.max(np.abs(grant_probabilities(p, params) - target)))


def power_at_equilibrium(p, params: SystemParams, profiles: Sequence[NodeProfile]) -> np.ndarray:
    """Equilibrium shortcut ``S_i = rho_hat_i + beta (1 - rho_t) p_i``.

    Raises :class:`NotAtEquilibrium` unless ``p`` solves the equilibrium
    equations for the profiles' demands to 1e-9.
    """
    dc = validate(params, profiles)
    p = as_request_vector(p, params.n)
    res = equilibrium_residual(p, params, profiles)
    if res > EQUILIBRIUM_TOL:
        raise NotAtEquilibrium(f"equilibrium residual {res:.3e} exceeds {EQUILIBRIUM_TOL}")
    return dc.rho_hat + dc.beta * (1.0 - dc.rho_t) * p


def total_power(p, params: SystemParams, profiles: Sequence[NodeProfile]) -> float:
    return float(performance(p, params, profiles).power.sum())
