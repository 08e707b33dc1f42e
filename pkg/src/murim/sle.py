"""Subspace Leverage Equalizer: ridge-leverage weighting of client updates.

Each update is normalized to a unit direction ``u_i`` and the rows are
stacked into ``U`` (n x d). The ridge leverage of row i is::

    l_i = u_i^T (U^T U + lam I)^-1 u_i

When d > n the same quantity is computed from the n x n Gram matrix
``G = U U^T`` via the push-through identity::

    U (U^T U + lam I)^-1 U^T = G (G + lam I)^-1

so no d x d system is ever formed for wide updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError, ProtocolError


@dataclass(frozen=True)
class SleParams:
    lambda_ridge: float = 1.0

    def __post_init__(self) -> None:
        if not self.lambda_ridge >= 0:
            raise ConfigError(f"must be >= 0, got {self.lambda_ridge}", key="sle.lambda_ridge")


@dataclass(frozen=True)
class SleWeights:
    leverage: np.ndarray
    weights: np.ndarray


def _unit_rows(updates) -> np.ndarray:
    g = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    norms = np.linalg.norm(g, axis=1)
    if np.any(norms == 0):
        raise ConfigError("zero-norm updates must be excluded before computing leverage")
    return g / norms[:, None]


def leverage_scores(
    updates: Sequence[np.ndarray] | np.ndarray,
    params: SleParams = SleParams(),
    form: str = "auto",
) -> np.ndarray:
    """Ridge leverage score of every update direction.

    Args:
        updates: n non-zero update vectors of equal dimension d.
        params: ridge regularizer.
        form: ``"primal"`` solves the d x d system, ``"gram"`` the n x n one,
            ``"auto"`` picks the smaller.

    Raises:
        NumericalError: lambda is 0 and the normalized updates are rank-deficient.
    """
    if len(updates) == 0:
        raise ProtocolError("leverage needs at least one update")
    u = _unit_rows(updates)
    n, d = u.shape
    lam = params.lambda_ridge
    if lam == 0 and np.linalg.matrix_rank(u) < min(n, d):
        raise NumericalError(
            "update directions are rank-deficient; set sle.lambda_ridge > 0"
        )
    if form == "auto":
        form = "gram" if d > n else "primal"
    try:
        if form == "gram":
            g = u @ u.T
            if lam == 0 and n > d:
                raise NumericalError("Gram form is singular when n > d and lambda = 0")
            # diag(G (G + lam I)^-1) equals diag((G + lam I)^-1 G) by symmetry
            return np.diag(np.linalg.solve(g + lam * np.eye(n), g)).copy()
        if form == "primal":
            if lam == 0 and d > n:
                raise NumericalError("primal form is singular when d > n and lambda = 0")
            x = np.linalg.solve(u.T @ u + lam * np.eye(d), u.T)
            return np.einsum("ik,ki->i", u, x)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"leverage system is singular: {exc}") from exc
    raise ConfigError(f"unknown form {form!r}")


def weights(leverage: np.ndarray) -> np.ndarray:
    """Normalize leverages onto the probability simplex."""
    leverage = np.asarray(leverage, dtype=np.float64)
    total = float(leverage.sum())
    if not total > 0:
        raise NumericalError(f"leverage sum must be positive, got {total}")
    return leverage / total


def aggregate(updates: Sequence[np.ndarray] | np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted sum of the raw (unnormalized) updates."""
    g = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    w = np.asarray(w, dtype=np.float64)
    if g.shape[0] != w.shape[0]:
        raise ProtocolError(f"{g.shape[0]} updates but {w.shape[0]} weights")
    return w @ g


def sle_weights(updates: Sequence[np.ndarray] | np.ndarray, params: SleParams = SleParams()) -> SleWeights:
    """Leverage and simplex weights for every update; zero-norm updates get weight 0."""
    g = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    nonzero = np.linalg.norm(g, axis=1) > 0
    lev = np.zeros(len(g))
    w = np.zeros(len(g))
    if nonzero.any():
        lev[nonzero] = leverage_scores(g[nonzero], params)
        w[nonzero] = weights(lev[nonzero])
    return SleWeights(lev, w)


def sle_aggregate(updates: Sequence[np.ndarray] | np.ndarray, params: SleParams = SleParams()) -> np.ndarray:
    g = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    return aggregate(g, sle_weights(g, params).weights)
