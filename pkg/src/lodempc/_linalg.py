"""Cholesky with jitter escalation and small dense linear-algebra helpers."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

GP_JITTERS = (0.0, 1e-8, 1e-6, 1e-4)
SAMPLER_JITTERS = (1e-8, 1e-6, 1e-4)


class FactorizationError(np.linalg.LinAlgError):
    pass


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def jittered_cholesky(A: np.ndarray, jitters=GP_JITTERS) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``A + jitter * I`` for the first jitter that works."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    eye = np.eye(n)
    for jitter in jitters:
        try:
            L = np.linalg.cholesky(A + jitter * eye if jitter else A)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise FactorizationError(
        f"matrix of size {n} not positive definite after jitter {jitters[-1]:g}"
    )


def cho_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return sla.cho_solve((L, True), B, check_finite=False)


def solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return sla.solve_triangular(L, B, lower=True, check_finite=False)


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric-eigenvalue square root with negative eigenvalues clipped to zero.

    Unlike a jittered Cholesky factor this adds no isotropic noise, so draws
    stay in the numerical range of ``A``.
    """
    w, U = np.linalg.eigh(symmetrize(np.asarray(A, dtype=float)))
    return U * np.sqrt(np.clip(w, 0.0, None))
