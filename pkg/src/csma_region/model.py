"""Scenario types, frame-success models and derived constants."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    InfeasibleLoad,
    InvalidCaptureRatio,
    InvalidRtsLength,
    InvalidScenario,
)


@dataclass(frozen=True)
class SystemParams:
    """Global constants shared by every node.

    Attributes
    ----------
    n : int
        Number of nodes.
    b : float
        Capture ratio (SINR threshold), must exceed 1.
    noise_ratio : float
        Noise power over transmit power, ``N0 / PT``.
    t0 : int
        Handshake phase length in slots.
    rts_len : float
        Actual RTS duration in slots, ``0 < rts_len < t0``.
    """

    n: int
    b: float
    noise_ratio: float = 0.0
    t0: int = 1
    rts_len: float = 0.2

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidScenario(f"n must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.b) and self.b > 1):
            raise InvalidCaptureRatio(f"capture ratio must exceed 1, got b={self.b!r}")
        if not (math.isfinite(self.noise_ratio) and self.noise_ratio >= 0):
            raise InvalidScenario(f"noise_ratio must be >= 0, got {self.noise_ratio!r}")
        if int(self.t0) != self.t0 or self.t0 < 1:
            raise InvalidScenario(f"t0 must be a positive integer, got {self.t0!r}")
        if not (0 < self.rts_len < self.t0):
            raise InvalidRtsLength(
                f"rts_len must lie in (0, t0={self.t0}), got {self.rts_len!r}"
            )

    @property
    def alpha(self) -> float:
        return self.b / (1.0 + self.b)

    @property
    def beta(self) -> float:
        return self.rts_len / self.t0

    @property
    def capture_factor(self) -> float:
        return math.exp(-self.b * self.noise_ratio)


# Frame success models --------------------------------------------------------


@dataclass(frozen=True)
class FrameSuccessOne:
    """Frames always succeed: ``P(T) = 1``."""

    def __call__(self, period: float) -> float:
        return 1.0

    def to_dict(self) -> dict:
        return {"kind": "one"}


@dataclass(frozen=True)
class SaturatingFrameSuccess:
    """``P(T) = 1 - c * exp(-T / tau)`` clipped to (0, 1].

    Nondecreasing in ``T`` and bounded below by ``1 - c > 0``.
    """

    c: float
    tau: float

    def __post_init__(self):
        if not (0.0 <= self.c < 1.0):
            raise InvalidScenario(f"saturating model needs 0 <= c < 1, got c={self.c!r}")
        if not self.tau > 0:
            raise InvalidScenario(f"saturating model needs tau > 0, got tau={self.tau!r}")

    def __call__(self, period: float) -> float:
        return min(1.0, max(1.0 - self.c * math.exp(-period / self.tau), 1e-300))

    def to_dict(self) -> dict:
        return {"kind": "saturating", "c": self.c, "tau": self.tau}


FrameSuccess = Callable[[float], float]


def frame_success_from_dict(data: dict | None) -> FrameSuccess:
    if data is None:
        return FrameSuccessOne()
    kind = data.get("kind")
    if kind == "one":
        return FrameSuccessOne()
    if kind == "saturating":
        try:
            return SaturatingFrameSuccess(c=float(data["c"]), tau=float(data["tau"]))
        except KeyError as exc:
            raise InvalidScenario(f"saturating frame_success is missing {exc}") from None
    raise InvalidScenario(f"unknown frame_success kind {kind!r}")


@dataclass(frozen=True)
class NodeProfile:
    """Per-node data period (slots), frame-success model and demand."""

    period: int
    demand: float = 0.0
    frame_success: FrameSuccess = field(default_factory=FrameSuccessOne)

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise InvalidScenario(f"period must be a positive integer, got {self.period!r}")
        if not (math.isfinite(self.demand) and self.demand >= 0):
            raise InvalidScenario(f"demand must be a nonnegative real, got {self.demand!r}")
        ps = self.frame_success(self.period)
        if not (0 < ps <= 1):
            raise InvalidScenario(f"frame_success({self.period}) = {ps!r} is outside (0, 1]")

    @property
    def success(self) -> float:
        return float(self.frame_success(self.period))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DerivedConstants:
    alpha: float
    beta: float
    capture_factor: float
    periods: np.ndarray
    success: np.ndarray
    rho_hat: np.ndarray
    rho_t: float
    m_prime: np.ndarray
    zero_demand: np.ndarray


def check_profiles(params: SystemParams, profiles: Sequence[NodeProfile]) -> None:
    if len(profiles) != params.n:
        raise InvalidScenario(f"expected {params.n} node profiles, got {len(profiles)}")


def periods_of(profiles: Sequence[NodeProfile]) -> np.ndarray:
    return np.array([pr.period for pr in profiles], dtype=float)


def success_of(profiles: Sequence[NodeProfile]) -> np.ndarray:
    return np.array([pr.success for pr in profiles], dtype=float)


def validate(params: SystemParams, profiles: Sequence[NodeProfile]) -> DerivedConstants:
    """Check a scenario and compute the constants every analysis needs.

    Raises :class:`InfeasibleLoad` when the effective load ``sum(rho_hat)``
    reaches 1, since the reduced equilibrium equations divide by ``1 - rho_t``.
    """
    check_profiles(params, profiles)
    periods = periods_of(profiles)
    success = success_of(profiles)
    demands = np.array([pr.demand for pr in profiles], dtype=float)
    rho_hat = demands / success
    rho_t = float(rho_hat.sum())
    if rho_t >= 1.0:
        raise InfeasibleLoad(f"effective load rho_t = {rho_t:.6g} must be below 1")
    cf = params.capture_factor
    return DerivedConstants(
        alpha=params.alpha,
        beta=params.beta,
        capture_factor=cf,
        periods=_frozen(periods),
        success=_frozen(success),
        rho_hat=_frozen(rho_hat),
        rho_t=rho_t,
        m_prime=_frozen(periods / params.t0 * cf),
        zero_demand=_frozen(demands == 0, dtype=bool),
    )


def as_request_vector(p, n: int) -> np.ndarray:
    """Coerce ``p`` into a float vector of length ``n`` with entries in [0, 1]."""
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise InvalidScenario(f"request vector must have {n} entries, got {arr.shape[0]}")
    if not np.all((arr >= 0) & (arr <= 1)):
        raise InvalidScenario("request probabilities must lie in [0, 1]")
    return arr


# Scenario JSON -----------------------------------------------------------------


def scenario_from_dict(data: dict[str, Any]) -> tuple[SystemParams, list[NodeProfile]]:
    try:
        nodes = data["nodes"]
        profiles = [
            NodeProfile(
                period=int(nd["period"]),
                demand=float(nd.get("demand", 0.0)),
                frame_success=frame_success_from_dict(nd.get("frame_success")),
            )
            for nd in nodes
        ]
        params = SystemParams(
            n=len(profiles),
            b=float(data["b"]),
            noise_ratio=float(data.get("noise_ratio", 0.0)),
            t0=int(data["t0"]),
            rts_len=float(data["rts_len"]),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidScenario(f"malformed scenario: {exc!r}") from None
    return params, profiles


def scenario_to_dict(params: SystemParams, profiles: Sequence[NodeProfile]) -> dict:
    return {
        "b": params.b,
        "noise_ratio": params.noise_ratio,
        "t0": params.t0,
        "rts_len": params.rts_len,
        "nodes": [
            {
                "period": pr.period,
                "demand": pr.demand,
                "frame_success": pr.frame_success.to_dict(),
            }
            for pr in profiles
        ],
    }


def load_scenario(path: str | Path) -> tuple[SystemParams, list[NodeProfile]]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InvalidScenario(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(data)
