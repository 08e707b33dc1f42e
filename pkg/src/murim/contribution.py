"""Contribution scoring of client updates against the round's global direction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ProtocolError


@dataclass(frozen=True)
class ContributionScore:
    value: float
    cosine: float


def global_direction(updates: Sequence[np.ndarray]) -> np.ndarray:
    """Coordinate-wise mean of the updates received this round."""
    if len(updates) == 0:
        raise ProtocolError("no updates received")
    stacked = np.asarray(updates, dtype=np.float64)
    if stacked.ndim != 2:
        raise ProtocolError("updates must share one dimension")
    return stacked.mean(axis=0)


def score(update: np.ndarray, v: np.ndarray) -> ContributionScore:
    """Signed magnitude ``||update|| * cos * |cos|`` where cos is taken against ``v``.

    Zero-norm inputs score 0 with cosine 0.
    """
    update = np.asarray(update, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if update.shape != v.shape:
        raise ProtocolError(f"dimension mismatch: {update.shape} vs {v.shape}")
    nu = float(np.linalg.norm(update))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return ContributionScore(0.0, 0.0)
    cos = float(np.clip(np.dot(update, v) / (nu * nv), -1.0, 1.0))
    return ContributionScore(nu * cos * abs(cos), cos)


def score_all(updates: Sequence[np.ndarray], v: np.ndarray) -> list[ContributionScore]:
    return [score(u, v) for u in updates]
