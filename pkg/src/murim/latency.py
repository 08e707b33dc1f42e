"""Latency model: expected latency from claims, observed latency from truth.

Latencies are seconds, capacities MAC/s, costs MAC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MIN_LATENCY_FRACTION = 0.05


@dataclass(frozen=True)
class ResourceProfile:
    rho: float
    lambda_overhead: float
    r_true: float
    r_reported: float

    def __post_init__(self) -> None:
        for name in ("rho", "r_true", "r_reported"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be > 0, got {getattr(self, name)}", key=name)
        if not self.lambda_overhead >= 0:
            raise ConfigError(f"must be >= 0, got {self.lambda_overhead}", key="lambda_overhead")

    @property
    def honest(self) -> bool:
        return self.r_reported == self.r_true


def expected_latency(p: ResourceProfile) -> float:
    return p.rho / p.r_reported + p.lambda_overhead


def true_latency(p: ResourceProfile) -> float:
    return p.rho / p.r_true + p.lambda_overhead


def observe_latency(p: ResourceProfile, jitter_cv: float, seed: int | np.random.Generator) -> float:
    """True latency times ``1 + N(0, jitter_cv^2)``, floored at 5% of the true latency."""
    if not 0 <= jitter_cv < 0.5:
        raise ConfigError(f"must lie in [0, 0.5), got {jitter_cv}", key="jitter_cv")
    base = true_latency(p)
    if jitter_cv == 0:
        return base
    z = np.random.default_rng(seed).standard_normal()
    return max(base * (1.0 + jitter_cv * z), MIN_LATENCY_FRACTION * base)


def infer_resources(observed: float, p: ResourceProfile) -> float:
    """Invert the latency model: ``rho / (observed - overhead)``.

    Returns ``math.inf`` when the observation does not exceed the overhead;
    callers treat that as an anomaly.
    """
    compute = observed - p.lambda_overhead
    if compute <= 0:
        return math.inf
    return p.rho / compute
