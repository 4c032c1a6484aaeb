"""Box bounds on channel-major grid vectors and their time-dependent schedules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoxBounds:
    """Elementwise ``lower <= z <= upper`` for a channel-major vector.

    ``-inf``/``inf`` entries mean the component is unconstrained on that side.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ValueError("NaN in bounds")
        if np.any(lo > hi):
            i = int(np.argmax(lo > hi))
            raise ValueError(f"lower bound exceeds upper bound at index {i}: {lo[i]} > {hi[i]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_channels(cls, lows: Sequence[float], highs: Sequence[float], n_times: int) -> "BoxBounds":
        lo = np.repeat(np.asarray(lows, dtype=float), n_times)
        hi = np.repeat(np.asarray(highs, dtype=float), n_times)
        return cls(lo, hi)

    @property
    def size(self) -> int:
        return self.lower.size

    def by_channel(self, n_channels: int) -> tuple[np.ndarray, np.ndarray]:
        """Bounds reshaped to ``(n_channels, n_times)``."""
        return self.lower.reshape(n_channels, -1), self.upper.reshape(n_channels, -1)

    def contains(self, z, tol: float = 0.0) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))


@dataclass(frozen=True)
class ChannelBound:
    """Piecewise-linear bound for one channel, from ``(time, lower, upper)`` breakpoints.

    Held constant outside the breakpoint range. A single breakpoint is a
    constant bound.
    """

    breakpoints: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        bps = tuple(tuple(float(v) for v in bp) for bp in self.breakpoints)
        if not bps:
            raise ValueError("a channel bound needs at least one breakpoint")
        if any(len(bp) != 3 for bp in bps):
            raise ValueError("breakpoints are (time, lower, upper) triples")
        times = [bp[0] for bp in bps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")
        for t, lo, hi in bps:
            if lo > hi:
                raise ValueError(f"lower bound {lo} exceeds upper bound {hi} at t={t}")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, lower: float, upper: float) -> "ChannelBound":
        return cls(((0.0, lower, upper),))

    @property
    def is_constant(self) -> bool:
        return len(self.breakpoints) == 1

    def evaluate(self, times) -> tuple[np.ndarray, np.ndarray]:
        t = np.atleast_1d(np.asarray(times, dtype=float))
        bt, lo, hi = (np.array(col) for col in zip(*self.breakpoints))
        return _interp(t, bt, lo), _interp(t, bt, hi)


def _interp(t, xp, fp):
    # np.interp produces nan on inf-inf differences; handle infinite plateaus separately
    if np.all(np.isfinite(fp)):
        return np.interp(t, xp, fp)
    out = np.empty_like(t)
    for k, tk in enumerate(t):
        j = np.searchsorted(xp, tk, side="right") - 1
        if j < 0:
            out[k] = fp[0]
        elif j >= len(xp) - 1:
            out[k] = fp[-1]
        elif np.isfinite(fp[j]) and np.isfinite(fp[j + 1]):
            w = (tk - xp[j]) / (xp[j + 1] - xp[j])
            out[k] = (1 - w) * fp[j] + w * fp[j + 1]
        else:
            out[k] = fp[j] if tk < xp[j + 1] else fp[j + 1]
    return out


@dataclass(frozen=True)
class BoundSchedule:
    """Per-channel bounds as functions of time; evaluates to :class:`BoxBounds`."""

    channels: tuple[ChannelBound, ...]

    @classmethod
    def constant(cls, lows: Sequence[float], highs: Sequence[float]) -> "BoundSchedule":
        return cls(tuple(ChannelBound.constant(lo, hi) for lo, hi in zip(lows, highs)))

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def on_grid(self, times) -> BoxBounds:
        parts = [c.evaluate(times) for c in self.channels]
        return BoxBounds(
            np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
        )
