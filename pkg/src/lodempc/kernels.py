"""Stationary base kernels with analytic derivatives and the LODE matrix kernel.

All derivative tables are written in the signed lag ``d = t - t2``. Since
``∂/∂t = d/dd`` and ``∂/∂t2 = -d/dd``, the mixed derivative of order
``(i, j)`` is ``(-1)**j * k^(i+j)(d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .polymat import PolyMatrix

SE_MAX_ORDER = 4


class KernelOrderError(ValueError):
    """Requested derivative order exceeds what the kernel supports."""


@dataclass(frozen=True)
class KernelSpec:
    """Base covariance ``kind`` ("se" or "matern") with its hyperparameters.

    For Matérn kernels ``r`` fixes the smoothness ``nu = r + 1/2``.
    """

    kind: str
    signal_variance: float = 1.0
    lengthscale: float = 1.0
    r: int | None = None

    def __post_init__(self):
        if self.kind not in ("se", "matern"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.signal_variance > 0 or not self.lengthscale > 0:
            raise ValueError("signal_variance and lengthscale must be positive")
        if self.kind == "matern" and (self.r is None or self.r < 0):
            raise ValueError("Matérn kernel needs a non-negative integer order r")
        if self.kind == "se" and self.r is not None:
            raise ValueError("SE kernel takes no order r")

    @property
    def max_order(self) -> int:
        """Largest per-argument derivative order available."""
        return self.r if self.kind == "matern" else SE_MAX_ORDER

    def with_hyperparameters(self, signal_variance: float, lengthscale: float) -> "KernelSpec":
        return KernelSpec(self.kind, float(signal_variance), float(lengthscale), self.r)


def se(signal_variance=1.0, lengthscale=1.0) -> KernelSpec:
    return KernelSpec("se", signal_variance, lengthscale)


def matern(r: int, signal_variance=1.0, lengthscale=1.0) -> KernelSpec:
    return KernelSpec("matern", signal_variance, lengthscale, r)


class BaseKernel:
    """Precomputed derivative tables ``k^(n)(d)`` for ``n <= 2 * max_order``.

    For the Matérn kernel on ``d >= 0``::

        k^(n)(d) = sigma_f^2 * exp(-c d) * q_n(d),   c = sqrt(2r+1) / l

    with ``q_{n+1} = q_n' - c q_n``; the branch ``d < 0`` follows from
    evenness. For SE, ``k^(n)(d) = sigma_f^2 * exp(-d^2 / 2 l^2) * h_n(d)``
    with ``h_{n+1} = h_n' - d h_n / l^2``.
    """

    def __init__(self, spec: KernelSpec):
        self.spec = spec
        self.max_total = 2 * spec.max_order
        ell = spec.lengthscale
        tables = []
        if spec.kind == "matern":
            r = spec.r
            c = math.sqrt(2 * r + 1) / ell
            q = np.zeros(r + 1)
            norm = math.factorial(r) / math.factorial(2 * r)
            for i in range(r + 1):
                q[r - i] = (
                    norm
                    * math.factorial(r + i)
                    / (math.factorial(i) * math.factorial(r - i))
                    * (2 * c) ** (r - i)
                )
            self.rate = c
            for _ in range(self.max_total + 1):
                tables.append(q)
                q = npoly.polysub(npoly.polyder(q), c * q) if q.size > 1 else -c * q
        else:
            h = np.array([1.0])
            shift = np.array([0.0, -1.0 / ell**2])
            for _ in range(self.max_total + 1):
                tables.append(h)
                h = npoly.polyadd(npoly.polyder(h), npoly.polymul(shift, h))
        self.tables = [np.trim_zeros(t, "b") if t.any() else np.zeros(1) for t in tables]

    def derivative(self, n: int, d):
        """``n``-th derivative of ``k`` with respect to the signed lag ``d``."""
        if n > self.max_total:
            raise KernelOrderError(
                f"derivative order {n} exceeds {self.max_total} for {self.spec}"
            )
        d = np.asarray(d, dtype=float)
        s2 = self.spec.signal_variance
        if self.spec.kind == "se":
            ell = self.spec.lengthscale
            return s2 * np.exp(-0.5 * (d / ell) ** 2) * npoly.polyval(d, self.tables[n])
        ad = np.abs(d)
        val = s2 * np.exp(-self.rate * ad) * npoly.polyval(ad, self.tables[n])
        if n % 2:
            val = np.where(d < 0, -val, np.where(d == 0, 0.0, val))
        return val

    def __call__(self, t, t2):
        return self.derivative(0, np.subtract(t, t2))

    def mixed(self, i: int, j: int, t, t2):
        r = self.spec.max_order
        if i > r or j > r or i < 0 or j < 0:
            raise KernelOrderError(
                f"mixed derivative ({i}, {j}) not defined for {self.spec} (max {r} per argument)"
            )
        sign = -1.0 if j % 2 else 1.0
        return sign * self.derivative(i + j, np.subtract(t, t2))


@lru_cache(maxsize=256)
def base_kernel(spec: KernelSpec) -> BaseKernel:
    return BaseKernel(spec)


def kernel_eval(spec: KernelSpec, t, t2):
    return base_kernel(spec)(t, t2)


def kernel_mixed_derivative(spec: KernelSpec, i: int, j: int, t, t2):
    return base_kernel(spec).mixed(i, j, t, t2)


class LodeKernel:
    """Matrix kernel ``P K~ P^T`` with ``P`` acting on both arguments.

    Block ``(a, b)`` at ``(t, t2)`` is
    ``sum_c P[a][c](∂_t) P[b][c](∂_t2) k_c(t, t2)``.
    Gram matrices are channel-major: all times of channel 0 first, then
    channel 1, and so on.
    """

    def __init__(self, parametrization: PolyMatrix, base: Sequence[KernelSpec]):
        P = parametrization
        base = list(base)
        if len(base) != P.cols:
            raise ValueError(f"{len(base)} base kernels for {P.cols} latent functions")
        for c, spec in enumerate(base):
            need = max(P[a, c].degree for a in range(P.rows))
            if need > spec.max_order:
                raise KernelOrderError(
                    f"latent {c}: operator degree {need} needs smoothness r >= {need}, got {spec}"
                )
        self.parametrization = P
        self.base = tuple(base)
        self.n_channels = P.rows
        self.n_latent = P.cols
        self._kernels = [base_kernel(s) for s in self.base]
        # weights[c][a][b][s]: coefficient of k_c^(s)(t - t2) in block (a, b)
        coeffs = [[P[a, c].to_floats() for c in range(P.cols)] for a in range(P.rows)]
        self._weights = []
        for c in range(P.cols):
            deg = max(P[a, c].degree for a in range(P.rows))
            w = np.zeros((P.rows, P.rows, 2 * max(deg, 0) + 1))
            for a in range(P.rows):
                for b in range(P.rows):
                    for m, pa in enumerate(coeffs[a][c]):
                        for n, pb in enumerate(coeffs[b][c]):
                            w[a, b, m + n] += pa * pb * (-1.0) ** n
            self._weights.append(w)

    def with_base(self, base: Sequence[KernelSpec]) -> "LodeKernel":
        return LodeKernel(self.parametrization, base)

    def block(self, a: int, b: int, t, t2):
        d = np.subtract(t, t2)
        out = np.zeros(np.shape(d))
        for k, w in zip(self._kernels, self._weights):
            for s, ws in enumerate(w[a, b]):
                if ws:
                    out = out + ws * k.derivative(s, d)
        return out

    def gram(self, times_a, times_b=None) -> np.ndarray:
        ta = np.atleast_1d(np.asarray(times_a, dtype=float))
        tb = ta if times_b is None else np.atleast_1d(np.asarray(times_b, dtype=float))
        na, nb, nz = ta.size, tb.size, self.n_channels
        d = ta[:, None] - tb[None, :]
        G = np.zeros((nz, na, nz, nb))
        for k, w in zip(self._kernels, self._weights):
            for s in range(w.shape[2]):
                ws = w[:, :, s]
                if not ws.any():
                    continue
                G += ws[:, None, :, None] * k.derivative(s, d)[None, :, None, :]
        return G.reshape(nz * na, nz * nb)


def default_matern_order(P: PolyMatrix) -> int:
    return max(P.max_degree(), 0)


def build_lode_kernel(P: PolyMatrix, base: Sequence[KernelSpec]) -> LodeKernel:
    return LodeKernel(P, base)


def gram_matrix(kernel: LodeKernel, times_a, times_b) -> np.ndarray:
    return kernel.gram(times_a, times_b)
