"""Throughput region, equilibria and power bounds of an RTS/CTS CSMA network
with SINR capture."""

from .bounds import BoundReport, Regime, bound_tightness_check, gamma, lemma1_oracle, phi, power_bound, psi, zeta_search
from .capture import conditional_capture, grant_oracle_enum, grant_probabilities
from .equilibrium import (
    Branch,
    Equilibrium,
    FeasibilityVerdict,
    follower_map,
    reduced_targets,
    region_membership,
    solve,
    successive_update,
)
from .metrics import Performance, performance, power_at_equilibrium, total_power
from .model import (
    DerivedConstants,
    FrameSuccessOne,
    NodeProfile,
    SaturatingFrameSuccess,
    SystemParams,
    load_scenario,
    validate,
)
from .simulator import SimConfig, SimReport, capture_trial, simulate

__version__ = "0.1.0"
