"""Gradient-level adversaries: model poisoning and noisy-gradient injection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

NONE = "none"
MPA = "mpa"
NGA = "nga"
KINDS = (NONE, MPA, NGA)


@dataclass(frozen=True)
class AttackConfig:
    kind: str = NONE
    mpa_scale: float = 2.0
    nga_sigma: float = 1.0
    attacker_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"must be one of {KINDS}, got {self.kind!r}", key="attack.kind")
        if not self.mpa_scale > 0:
            raise ConfigError("must be > 0", key="attack.mpa_scale")
        if not self.nga_sigma > 0:
            raise ConfigError("must be > 0", key="attack.nga_sigma")
        if not 0 <= self.attacker_fraction <= 1:
            raise ConfigError("must lie in [0, 1]", key="attack.attacker_fraction")


def poison(update: np.ndarray, gamma: float) -> np.ndarray:
    """Sign-flip and scale: ``-gamma * update``."""
    if not gamma > 0:
        raise ConfigError("gamma must be > 0")
    return -gamma * np.asarray(update, dtype=np.float64)


def noisy(update: np.ndarray, sigma: float, seed: int | np.random.Generator) -> np.ndarray:
    """Add ``sigma * N(0, I)``."""
    if not sigma > 0:
        raise ConfigError("sigma must be > 0")
    update = np.asarray(update, dtype=np.float64)
    return update + sigma * np.random.default_rng(seed).standard_normal(update.shape)


def apply_attack(update: np.ndarray, config: AttackConfig, seed: int | np.random.Generator) -> np.ndarray:
    if config.kind == MPA:
        return poison(update, config.mpa_scale)
    if config.kind == NGA:
        return noisy(update, config.nga_sigma, seed)
    return np.asarray(update, dtype=np.float64)
