"""Reweighting a Gaussian plan with a quadratic cost expressed as a Gaussian."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import cho_solve, jittered_cholesky, symmetrize
from .lodegp import GaussianBelief


@dataclass(frozen=True)
class CostSpec:
    """Reference ``z_ref`` and diagonal weight ``S`` (the inverse cost weight)."""

    z_ref: np.ndarray
    s_diag: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z_ref, dtype=float).ravel()
        s = np.asarray(self.s_diag, dtype=float).ravel()
        if z.shape != s.shape:
            raise ValueError(f"z_ref has size {z.size} but S has {s.size} diagonal entries")
        if not np.all(s > 0):
            raise ValueError("diagonal entries of S must be positive")
        object.__setattr__(self, "z_ref", z)
        object.__setattr__(self, "s_diag", s)

    @classmethod
    def per_channel(cls, z_ref: Sequence[float], s: Sequence[float], n_times: int) -> "CostSpec":
        """Broadcast per-channel constants over a grid, channel-major."""
        return cls(np.repeat(np.asarray(z_ref, float), n_times), np.repeat(np.asarray(s, float), n_times))


def gaussian_product(belief: GaussianBelief, cost: CostSpec) -> GaussianBelief:
    """Normalised product ``N(mu*, Sigma*) N(z_ref, S)``.

    Uses ``Sigma_opt = Sigma* - Sigma* (Sigma* + S)^-1 Sigma*`` and
    ``mu_opt = mu* + Sigma* (Sigma* + S)^-1 (z_ref - mu*)``, which only
    factorizes ``Sigma* + S`` and so tolerates a singular ``Sigma*``.
    """
    mu, Sig = belief.mean, belief.cov
    if cost.z_ref.size != mu.size:
        raise ValueError(f"cost of size {cost.z_ref.size} for belief of size {mu.size}")
    L, _ = jittered_cholesky(Sig + np.diag(cost.s_diag))
    mean = mu + Sig @ cho_solve(L, cost.z_ref - mu)
    cov = symmetrize(Sig - Sig @ cho_solve(L, Sig))
    return GaussianBelief(belief.grid, mean, cov)
