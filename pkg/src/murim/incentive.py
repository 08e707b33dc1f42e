"""Rewards and client utility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class IncentiveParams:
    w_contribution: float = 1.0
    w_latency: float = 1.0
    w_reliability: float = 1.0
    r0: float = 0.5
    s: float = 0.1
    zeta: float = 2.0
    # None: calibrated by the simulator from the first round's resource reports
    omega: float | None = None

    def __post_init__(self) -> None:
        for name in ("w_contribution", "w_latency", "w_reliability"):
            if not getattr(self, name) >= 0:
                raise ConfigError("must be >= 0", key=f"incentive.{name}")
        if not 0 <= self.r0 <= 1:
            raise ConfigError("must lie in [0, 1]", key="incentive.r0")
        for name in ("s", "zeta"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", key=f"incentive.{name}")
        if self.omega is not None and not self.omega > 0:
            raise ConfigError("must be > 0", key="incentive.omega")


@dataclass(frozen=True)
class Payment:
    incentive: float
    utility: float


class PayableRecord(Protocol):
    contribution: float
    observed_latency: float
    p_reliability: float
    r_reported: float
    dropped: bool


def sigmoid(x):
    # branch on sign so exp never overflows; exactly 0.5 at 0
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def incentive(c_score, latency, p_rel, params: IncentiveParams):
    """Reward for one client-round.

    ``a*C + b/L + c * P**zeta * sigmoid((P - r0) / s)``. Works elementwise on
    arrays; returns a float for scalar inputs.
    """
    latency = np.asarray(latency, dtype=np.float64)
    if np.any(latency <= 0):
        raise ConfigError("latency must be positive")
    p_rel = np.asarray(p_rel, dtype=np.float64)
    value = (
        params.w_contribution * np.asarray(c_score, dtype=np.float64)
        + params.w_latency / latency
        + params.w_reliability * p_rel**params.zeta * sigmoid((p_rel - params.r0) / params.s)
    )
    return float(value) if value.ndim == 0 else value


def utility(incentive: float, resources_used: float, omega: float) -> float:
    """Net benefit ``(I * omega - R) / omega``."""
    if not omega > 0:
        raise ConfigError("omega must be positive", key="incentive.omega")
    return (incentive * omega - resources_used) / omega


def pay_round(records: Sequence[PayableRecord], params: IncentiveParams) -> list[Payment]:
    """Payments for one round. Dropped clients earn nothing but still bear their cost."""
    if params.omega is None:
        raise ConfigError("omega must be resolved before paying", key="incentive.omega")
    out = []
    for rec in records:
        reward = 0.0 if rec.dropped else incentive(
            rec.contribution, rec.observed_latency, rec.p_reliability, params
        )
        out.append(Payment(reward, utility(reward, rec.r_reported, params.omega)))
    return out
