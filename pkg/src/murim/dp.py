"""Gaussian mechanism applied to client updates before upload."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_DELTA = 1e-5
DEFAULT_EPSILON_CAP = 50.0
_CLIP_HEADROOM = 1.0 - 64 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = DEFAULT_DELTA
    clip_norm: float = 1.0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ConfigError(f"must be > 0, got {self.epsilon}", key="epsilon")
        if not 0 < self.delta < 1:
            raise ConfigError(f"must lie in (0, 1), got {self.delta}", key="delta")
        if not self.clip_norm > 0:
            raise ConfigError(f"must be > 0, got {self.clip_norm}", key="clip_norm")


def clip(update: np.ndarray, clip_norm: float) -> np.ndarray:
    """Scale ``update`` by ``min(1, clip_norm / ||update||)``."""
    update = np.asarray(update, dtype=np.float64)
    norm = float(np.linalg.norm(update))
    if norm <= clip_norm:
        return update.copy()
    out = update * (clip_norm / norm)
    # rounding can leave the norm a few ulps above the bound, and other norm
    # routines (batched, different summation order) can disagree by a few more
    over = float(np.linalg.norm(out))
    if over > clip_norm * _CLIP_HEADROOM:
        out *= clip_norm * _CLIP_HEADROOM / over
    return out


def gaussian_noise_sigma(params: PrivacyParams, epsilon_cap: float = DEFAULT_EPSILON_CAP) -> float:
    """Classical (epsilon, delta) calibration: S * sqrt(2 ln(1.25/delta)) / epsilon."""
    if params.epsilon > epsilon_cap:
        raise ConfigError(
            f"{params.epsilon} exceeds the sanity cap {epsilon_cap}", key="epsilon"
        )
    return params.clip_norm * math.sqrt(2.0 * math.log(1.25 / params.delta)) / params.epsilon


def privatize(
    update: np.ndarray,
    params: PrivacyParams,
    seed: int | np.random.Generator,
    epsilon_cap: float = DEFAULT_EPSILON_CAP,
    clip_first: bool = True,
) -> np.ndarray:
    """Clip, then add isotropic Gaussian noise at the calibrated scale.

    ``clip_first=False`` skips the norm bound; the simulator uses it for
    attackers, who run their own pipeline and do not cap their update.
    """
    sigma = gaussian_noise_sigma(params, epsilon_cap)
    rng = np.random.default_rng(seed)
    base = clip(update, params.clip_norm) if clip_first else np.asarray(update, dtype=np.float64)
    return base + sigma * rng.standard_normal(base.shape)
