"""Conditioning, evidence and hyperparameter training for LODE-GP priors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._linalg import FactorizationError, cho_solve, jittered_cholesky, solve_lower, symmetrize
from .bounds import BoxBounds
from .kernels import KernelSpec, LodeKernel

log = logging.getLogger(__name__)

INITIAL_JITTER = 1e-8
NOISE_FLOOR = 1e-8


@dataclass(frozen=True)
class Dataset:
    """Observations of all channels at ``times``.

    ``values`` and ``noise`` have shape ``(n_times, n_channels)``. A noise
    variance of ``inf`` marks a channel as unobserved at that time.
    """

    times: np.ndarray
    values: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        s = np.atleast_2d(np.asarray(self.noise, dtype=float))
        if t.size == 0:
            raise ValueError("dataset needs at least one datapoint")
        if v.shape[0] != t.size or s.shape != v.shape:
            raise ValueError(f"inconsistent shapes: times {t.shape}, values {v.shape}, noise {s.shape}")
        if np.any(s < 0) or np.isnan(s).any():
            raise ValueError("noise variances must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "noise", s)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def flat(self):
        """Channel-major observation vector, noise vector and observed mask."""
        y = self.values.T.ravel()
        s = self.noise.T.ravel()
        mask = np.isfinite(s)
        return y[mask], np.maximum(s[mask], NOISE_FLOOR), mask


@dataclass(frozen=True)
class GaussianBelief:
    """Joint normal over all channels on ``grid``, channel-major."""

    grid: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.mean.size // self.grid.size if self.grid.size else 0

    def channel(self, c: int) -> np.ndarray:
        n = self.grid.size
        return self.mean[c * n : (c + 1) * n]

    def variance(self) -> np.ndarray:
        return np.diag(self.cov).copy()


def build_dataset(t0: float, z0, bounds: BoxBounds, grid) -> Dataset:
    """Initial-condition point plus one constraint-centre point per later grid time.

    The initial point carries jitter noise; a constraint point at ``t`` has
    value ``(lo + hi) / 2`` and noise variance ``(hi - lo) / 2``, floored at
    the jitter. Channels with an infinite bound side are left unobserved.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    z0 = np.asarray(z0, dtype=float).ravel()
    nz = z0.size
    if bounds.size != nz * grid.size:
        raise ValueError(f"bounds of size {bounds.size} do not cover {nz} channels x {grid.size} times")
    lo, hi = bounds.by_channel(nz)
    later = grid > t0
    lo, hi = lo[:, later].T, hi[:, later].T
    finite = np.isfinite(lo) & np.isfinite(hi)
    with np.errstate(invalid="ignore"):
        centre = np.where(finite, 0.5 * (hi + lo), 0.0)
        noise = np.where(finite, np.maximum(0.5 * (hi - lo), NOISE_FLOOR), np.inf)
    return Dataset(
        times=np.concatenate([[t0], grid[later]]),
        values=np.vstack([z0[None, :], centre]),
        noise=np.vstack([np.full((1, nz), INITIAL_JITTER), noise]),
    )


def _factor(kernel: LodeKernel, data: Dataset):
    y, s, mask = data.flat()
    K = kernel.gram(data.times)[np.ix_(mask, mask)]
    L, _ = jittered_cholesky(K + np.diag(s))
    return L, y, mask


def posterior(kernel: LodeKernel, data: Dataset, grid) -> GaussianBelief:
    """Zero-mean GP posterior at ``grid`` with diagonal heteroscedastic noise."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        return GaussianBelief(grid, np.zeros(0), np.zeros((0, 0)))
    L, y, mask = _factor(kernel, data)
    Ks = kernel.gram(data.times, grid)[mask]
    alpha = cho_solve(L, y)
    W = solve_lower(L, Ks)
    mean = Ks.T @ alpha
    cov = symmetrize(kernel.gram(grid) - W.T @ W)
    return GaussianBelief(grid, mean, cov)


def log_marginal_likelihood(kernel: LodeKernel, data: Dataset) -> float:
    L, y, _ = _factor(kernel, data)
    alpha = cho_solve(L, y)
    return float(
        -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * y.size * math.log(2 * math.pi)
    )


class TrainingError(RuntimeError):
    pass


LOG_BOUNDS = ((math.log(1e-4), math.log(1e4)), (math.log(1e-2), math.log(1e2)))


def train_hyperparameters(
    kernel: LodeKernel,
    data: Dataset,
    max_iter: int = 500,
    tol: float = 1e-6,
    max_failures: int = 20,
) -> list[KernelSpec]:
    """Maximise the evidence over ``(signal_variance, lengthscale)`` of every latent kernel.

    Nelder-Mead in log space. Candidates whose factorization fails score
    ``-inf``, which the simplex treats as a rejected step and contracts away
    from; ``max_failures`` consecutive failures abort with
    :class:`TrainingError`. The returned parameters never have lower evidence
    than the starting ones.
    """
    base = list(kernel.base)
    theta0 = np.log([[s.signal_variance, s.lengthscale] for s in base]).ravel()
    if max_iter <= 0:
        return base

    def specs(theta):
        th = np.exp(theta.reshape(-1, 2))
        return [s.with_hyperparameters(a, b) for s, (a, b) in zip(base, th)]

    failures = 0

    def objective(theta):
        nonlocal failures
        try:
            val = log_marginal_likelihood(kernel.with_base(specs(theta)), data)
        except (FactorizationError, FloatingPointError, ValueError):
            val = -np.inf
        if not np.isfinite(val):
            failures += 1
            if failures >= max_failures:
                raise TrainingError(f"{failures} consecutive non-finite evidence evaluations")
            return np.inf
        failures = 0
        return -val

    start = objective(theta0)
    if not np.isfinite(start):
        raise TrainingError("evidence is not finite at the initial hyperparameters")
    res = minimize(
        objective,
        theta0,
        method="Nelder-Mead",
        bounds=LOG_BOUNDS * len(base),
        options={"maxiter": max_iter, "fatol": tol, "xatol": 1e-6},
    )
    if not res.fun <= start:
        return base
    log.debug("trained hyperparameters %s (lml %.6g -> %.6g)", np.exp(res.x), -start, -res.fun)
    return specs(res.x)
