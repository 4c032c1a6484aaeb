"""Exact Hamiltonian Monte Carlo for box-truncated multivariate normals.

The integrator backend is the compiled ``_hmc_core`` extension when it was
built, else the numpy fallback in ``_hmc_py``. Set ``LODEMPC_BACKEND=python``
to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _hmc_py
from ._linalg import SAMPLER_JITTERS, jittered_cholesky
from .bounds import BoxBounds
from .lodegp import GaussianBelief

BACKENDS = {"python": _hmc_py.integrate_path}
try:
    from . import _hmc_core
except ImportError:  # extension not built
    _hmc_core = None
else:
    BACKENDS["cython"] = _hmc_core.integrate_path

BACKEND = os.environ.get("LODEMPC_BACKEND") or ("cython" if "cython" in BACKENDS else "python")
if BACKEND not in BACKENDS:
    raise ImportError(f"LODEMPC_BACKEND={BACKEND!r} is not available (have {sorted(BACKENDS)})")

DEFAULT_TRAJECTORY_TIME = math.pi / 2
FEASIBILITY_TOL = 1e-9
NUDGE = 1e-9


class SamplerError(RuntimeError):
    pass


def integrate_path(pos, vel, lower, upper, cov, total_time, max_bounces, min_hit_time=1e-10, backend=None):
    return BACKENDS[backend or BACKEND](
        pos, vel, lower, upper, cov, total_time, max_bounces, min_hit_time
    )


def reflect_velocity(vel, i: int, cov) -> np.ndarray:
    """Specular reflection off the wall on component ``i``, in mean-offset coordinates."""
    vel = np.asarray(vel, dtype=float)
    return vel - (2.0 * vel[i] / cov[i, i]) * cov[:, i]


@dataclass
class SampleBatch:
    samples: np.ndarray
    seed: object
    bounces: np.ndarray
    trajectory_time: float
    jitter: float
    backend: str
    meta: dict = field(default_factory=dict)


def clamp_to_box(mean, bounds: BoxBounds) -> np.ndarray:
    """Clip ``mean`` into the box, nudging clipped or boundary entries inward.

    The nudge is ``1e-9 * (upper - lower)``, or ``1e-9`` when the range is
    infinite, so the chain starts strictly inside.
    """
    z = np.clip(np.asarray(mean, dtype=float), bounds.lower, bounds.upper)
    width = bounds.upper - bounds.lower
    eps = np.where(np.isfinite(width), NUDGE * width, NUDGE)
    z = np.where(z <= bounds.lower, bounds.lower + eps, z)
    z = np.where(z >= bounds.upper, bounds.upper - eps, z)
    return z


def sample_truncated(
    belief: GaussianBelief,
    bounds: BoxBounds,
    init,
    n_samples: int = 200,
    seed=None,
    trajectory_time: float = DEFAULT_TRAJECTORY_TIME,
    max_bounces: int | None = None,
    backend: str | None = None,
) -> SampleBatch:
    """Markov chain targeting ``N(mean, cov)`` restricted to ``bounds``.

    Each step draws a fresh velocity, follows the closed-form Hamiltonian
    path for ``trajectory_time`` with specular reflections at the walls and
    records the end point; there is no burn-in. A rank-deficient covariance is
    replaced by its jittered full-rank surrogate before whitening.
    """
    mu = np.asarray(belief.mean, dtype=float)
    d = mu.size
    init = np.asarray(init, dtype=float)
    if init.shape != mu.shape or bounds.size != d:
        raise ValueError(f"shape mismatch: mean {mu.shape}, init {init.shape}, bounds {bounds.size}")
    if np.any(bounds.lower == bounds.upper):
        raise ValueError("zero-width bounds cannot be sampled")
    if not (np.all(init > bounds.lower) and np.all(init < bounds.upper)):
        bad = np.flatnonzero((init <= bounds.lower) | (init >= bounds.upper))
        raise SamplerError(f"initial point not strictly feasible at components {bad[:10].tolist()}")
    if max_bounces is None:
        max_bounces = 10 * d
    backend = backend or BACKEND

    L, jitter = jittered_cholesky(belief.cov, SAMPLER_JITTERS)
    cov = np.ascontiguousarray(belief.cov + jitter * np.eye(d))
    lo = bounds.lower - mu
    hi = bounds.upper - mu
    pos = init - mu
    rng = np.random.default_rng(seed)
    samples = np.empty((n_samples, d))
    bounces = np.empty(n_samples, dtype=int)
    for k in range(n_samples):
        vel = L @ rng.standard_normal(d)
        pos, _, nb = integrate_path(pos, vel, lo, hi, cov, trajectory_time, max_bounces, backend=backend)
        if nb < 0:
            raise SamplerError(
                f"sample {k}: more than {max_bounces} wall collisions in one trajectory "
                f"(dimension {d}, jitter {jitter:g})"
            )
        bounces[k] = nb
        samples[k] = mu + pos

    over = np.maximum(samples - bounds.upper, 0) + np.maximum(bounds.lower - samples, 0)
    worst = float(over.max()) if over.size else 0.0
    if worst > FEASIBILITY_TOL:
        raise SamplerError(f"sample left the box by {worst:.3g}")
    # rounding in mu + pos can leave an entry an ulp outside its wall
    samples = np.clip(samples, bounds.lower, bounds.upper)
    return SampleBatch(samples, seed, bounces, trajectory_time, jitter, backend)


def posterior_summary(batch: SampleBatch) -> np.ndarray:
    return batch.samples.mean(axis=0)
