"""Pure-numpy wall-bouncing integrator; fallback for the compiled ``_hmc_core``.

Works on offsets from the mean: ``z(tau) - mu = pos cos(tau) + vel sin(tau)``
with ``vel = L v`` for a whitened velocity ``v``. A hit on wall ``i`` reflects
the whitened velocity about the wall normal ``L^T e_i``, which in these
coordinates is ``vel -= 2 vel[i] / cov[i, i] * cov[:, i]``.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def integrate_path(pos, vel, lower, upper, cov, total_time, max_bounces, min_hit_time=1e-10):
    """Follow the exact Hamiltonian path for ``total_time``.

    Returns ``(pos, vel, n_bounces)``; ``n_bounces`` is ``-1`` when more than
    ``max_bounces`` collisions would be needed.
    """
    pos = np.array(pos, dtype=float)
    vel = np.array(vel, dtype=float)
    lo_idx = np.flatnonzero(np.isfinite(lower))
    hi_idx = np.flatnonzero(np.isfinite(upper))
    idx = np.concatenate([lo_idx, hi_idx])
    g = np.concatenate([lower[lo_idx], upper[hi_idx]])
    # upper walls are hit while rising, lower walls while falling
    side = np.concatenate([-np.ones(lo_idx.size), np.ones(hi_idx.size)])

    remaining = float(total_time)
    bounces = 0
    while True:
        a = pos[idx]
        b = vel[idx]
        amp = np.hypot(a, b)
        reach = amp > np.abs(g)
        t_hit = remaining
        wall = -1
        if reach.any():
            r = np.flatnonzero(reach)
            phase = np.arctan2(b[r], a[r])
            tau = np.mod(phase - side[r] * np.arccos(g[r] / amp[r]), TWO_PI)
            tau[tau < min_hit_time] = np.inf
            k = int(np.argmin(tau))
            if tau[k] < remaining:
                t_hit = float(tau[k])
                wall = int(r[k])
        c, s = np.cos(t_hit), np.sin(t_hit)
        pos, vel = pos * c + vel * s, vel * c - pos * s
        if wall < 0:
            return pos, vel, bounces
        i = idx[wall]
        pos[i] = g[wall]
        vel -= (2.0 * vel[i] / cov[i, i]) * cov[:, i]
        bounces += 1
        if bounces > max_bounces:
            return pos, vel, -1
        remaining -= t_hit
