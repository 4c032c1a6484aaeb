# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled wall-bouncing integrator; same contract as ``_hmc_py.integrate_path``."""

import numpy as np
from libc.math cimport acos, atan2, cos, fabs, fmod, hypot, isfinite, sin, M_PI

cdef double TWO_PI = 2.0 * M_PI


def integrate_path(pos_in, vel_in, lower_in, upper_in, cov_in,
                   double total_time, long max_bounces, double min_hit_time=1e-10):
    cdef double[::1] pos = np.array(pos_in, dtype=np.float64)
    cdef double[::1] vel = np.array(vel_in, dtype=np.float64)
    cdef const double[::1] lower = np.ascontiguousarray(lower_in, dtype=np.float64)
    cdef const double[::1] upper = np.ascontiguousarray(upper_in, dtype=np.float64)
    # symmetric, so row i doubles as column i
    cdef const double[:, ::1] cov = np.ascontiguousarray(cov_in, dtype=np.float64)
    cdef Py_ssize_t d = pos.shape[0]
    cdef Py_ssize_t i, k, wall
    cdef int wall_side
    cdef double remaining = total_time
    cdef double t_hit, tau, amp, g, a, b, c, s, p, v, scale
    cdef long bounces = 0

    while True:
        t_hit = remaining
        wall = -1
        wall_side = 0
        for i in range(d):
            a = pos[i]
            b = vel[i]
            amp = hypot(a, b)
            if isfinite(upper[i]):
                g = upper[i]
                if amp > fabs(g):
                    tau = fmod(atan2(b, a) - acos(g / amp), TWO_PI)
                    if tau < 0:
                        tau += TWO_PI
                    if tau >= min_hit_time and tau < t_hit:
                        t_hit = tau
                        wall = i
                        wall_side = 1
            if isfinite(lower[i]):
                g = lower[i]
                if amp > fabs(g):
                    tau = fmod(atan2(b, a) + acos(g / amp), TWO_PI)
                    if tau < 0:
                        tau += TWO_PI
                    if tau >= min_hit_time and tau < t_hit:
                        t_hit = tau
                        wall = i
                        wall_side = -1

        c = cos(t_hit)
        s = sin(t_hit)
        for k in range(d):
            p = pos[k]
            v = vel[k]
            pos[k] = p * c + v * s
            vel[k] = v * c - p * s
        if wall < 0:
            return np.asarray(pos), np.asarray(vel), bounces

        pos[wall] = upper[wall] if wall_side > 0 else lower[wall]
        scale = 2.0 * vel[wall] / cov[wall, wall]
        for k in range(d):
            vel[k] -= scale * cov[wall, k]
        bounces += 1
        if bounces > max_bounces:
            return np.asarray(pos), np.asarray(vel), -1
        remaining -= t_hit
