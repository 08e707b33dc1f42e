"""Subjective-logic reliability assessment.

Two channels are tracked per client:

* resources: inferred capacity compared with the declared capacity;
* privacy: the round's contribution scores screened with IQR fences.

Each round a channel yields one indicator (belief, uncertainty or
disbelief). Belief adds one unit of positive evidence, disbelief one unit
of negative evidence, uncertainty adds nothing. Opinions follow the usual
evidence mapping with prior weight W::

    b = r / (r + s + W),  d = s / (r + s + W),  u = W / (r + s + W)

and a channel's probability is the opinion expectation ``b + a * u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError

BASE_RATE = 0.5
PRIOR_WEIGHT = 2.0
MIN_PRIVACY_POPULATION = 4


class Indicator(str, Enum):
    BELIEF = "belief"
    UNCERTAINTY = "uncertainty"
    DISBELIEF = "disbelief"


@dataclass(frozen=True)
class Opinion:
    """Binomial opinion backed by evidence counts."""

    pos_evidence: float = 0.0
    neg_evidence: float = 0.0
    prior_weight: float = PRIOR_WEIGHT
    base_rate: float = BASE_RATE

    def __post_init__(self) -> None:
        if self.pos_evidence < 0 or self.neg_evidence < 0:
            raise ConfigError("evidence counts must be non-negative")
        if not self.prior_weight > 0:
            raise ConfigError("prior_weight must be positive")
        if not 0 <= self.base_rate <= 1:
            raise ConfigError("base_rate must lie in [0, 1]")

    @property
    def _total(self) -> float:
        return self.pos_evidence + self.neg_evidence + self.prior_weight

    @property
    def belief(self) -> float:
        return self.pos_evidence / self._total

    @property
    def disbelief(self) -> float:
        return self.neg_evidence / self._total

    @property
    def uncertainty(self) -> float:
        return self.prior_weight / self._total


@dataclass(frozen=True)
class BandParams:
    alpha: float = 0.10
    eps_r: float = 0.10
    kappa: float = 1.5
    gamma_margin: float = 0.5
    reliability_threshold: float = 0.25
    grace_rounds: int = 3

    def __post_init__(self) -> None:
        for name in ("alpha", "eps_r", "kappa", "gamma_margin"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", key=f"reputation.{name}")
        if not 0 <= self.reliability_threshold <= 1:
            raise ConfigError("must lie in [0, 1]", key="reputation.reliability_threshold")
        if self.grace_rounds < 0:
            raise ConfigError("must be >= 0", key="reputation.grace_rounds")


@dataclass
class ReliabilityState:
    resource_opinion: Opinion = field(default_factory=Opinion)
    privacy_opinion: Opinion = field(default_factory=Opinion)
    dropped: bool = False
    dropped_round: int | None = None

    @property
    def p_resources(self) -> float:
        return expectation(self.resource_opinion)

    @property
    def p_privacy(self) -> float:
        return expectation(self.privacy_opinion)

    @property
    def p_reliability(self) -> float:
        return reliability(self)


def classify_resource(r_inferred: float, r_reported: float, bands: BandParams) -> Indicator:
    """Band test on the relative deviation ``|r_inferred - r_reported| / r_reported``."""
    if not r_reported > 0:
        raise ConfigError("r_reported must be positive")
    if math.isinf(r_inferred) or math.isnan(r_inferred):
        return Indicator.DISBELIEF
    dev = abs(r_inferred - r_reported) / r_reported
    if dev <= bands.alpha:
        return Indicator.BELIEF
    if dev <= bands.alpha + bands.eps_r:
        return Indicator.UNCERTAINTY
    return Indicator.DISBELIEF


@dataclass(frozen=True)
class Fences:
    lower: float
    upper: float
    margin: float

    def classify(self, score: float) -> Indicator:
        if self.lower <= score <= self.upper:
            return Indicator.BELIEF
        if self.lower - self.margin < score < self.upper + self.margin:
            return Indicator.UNCERTAINTY
        return Indicator.DISBELIEF


def iqr_fences(all_scores: Sequence[float], bands: BandParams) -> Fences | None:
    """Trusted interval and margin from type-7 quartiles; None below 4 scores."""
    scores = np.asarray(all_scores, dtype=np.float64)
    if scores.size < MIN_PRIVACY_POPULATION:
        return None
    q1, q3 = np.quantile(scores, [0.25, 0.75], method="linear")
    iqr = float(q3 - q1)
    return Fences(float(q1) - bands.kappa * iqr, float(q3) + bands.kappa * iqr, bands.gamma_margin * iqr)


def classify_privacy(score: float, all_scores: Sequence[float], bands: BandParams) -> Indicator:
    fences = iqr_fences(all_scores, bands)
    if fences is None:
        return Indicator.UNCERTAINTY
    return fences.classify(score)


def classify_privacy_round(scores: Sequence[float], bands: BandParams) -> list[Indicator]:
    """Classify every score of one round against the round's own fences."""
    fences = iqr_fences(scores, bands)
    if fences is None:
        return [Indicator.UNCERTAINTY] * len(scores)
    return [fences.classify(s) for s in scores]


def update_opinion(op: Opinion, indicator: Indicator) -> Opinion:
    if indicator is Indicator.BELIEF:
        return replace(op, pos_evidence=op.pos_evidence + 1)
    if indicator is Indicator.DISBELIEF:
        return replace(op, neg_evidence=op.neg_evidence + 1)
    return op


def expectation(op: Opinion) -> float:
    return op.belief + op.base_rate * op.uncertainty


def reliability(state: ReliabilityState) -> float:
    return expectation(state.resource_opinion) * expectation(state.privacy_opinion)


def observe(state: ReliabilityState, resource: Indicator, privacy: Indicator) -> ReliabilityState:
    """Fold one round of indicators into ``state`` (in place) and return it."""
    state.resource_opinion = update_opinion(state.resource_opinion, resource)
    state.privacy_opinion = update_opinion(state.privacy_opinion, privacy)
    return state


def apply_threshold(state: ReliabilityState, round: int, bands: BandParams) -> bool:
    """Drop the client for good once past the grace period and below threshold.

    The comparison is strict: a reliability equal to the threshold survives.
    """
    if state.dropped:
        return True
    if round >= bands.grace_rounds and state.p_reliability < bands.reliability_threshold:
        state.dropped = True
        state.dropped_round = round
    return state.dropped
