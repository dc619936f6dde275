"""
Compiled fast-timescale loops.

Each iteration has two halves: the channel side measures every receiver's
SINR, then every transmitter applies the local rule
``p <- min(target * (p / gamma), p_max)`` using only its own feedback.  The
unicast and multicast loops share the same arithmetic order so a multicast
instance with one receiver per group reproduces the unicast powers exactly.
"""

import numpy as np
from numba import njit

RESTART_FRACTION = 1e-6
TINY = 1e-300


@njit(cache=True)
def _local_rule(tsinr, gamma, p, p_max):
    if p <= 0.0 and tsinr > 0.0:
        return RESTART_FRACTION * p_max
    q = tsinr * (p / max(gamma, TINY))
    return p_max if q > p_max else q


@njit(cache=True)
def settle_unicast(tsinr, p_start, p_max, direct, cross, noise, tol, max_iter, residuals):
    L = p_start.shape[0]
    p = p_start.copy()
    gamma = np.empty(L)
    p_new = np.empty(L)
    for it in range(1, max_iter + 1):
        for l in range(L):
            acc = noise[l]
            for k in range(L):
                acc += cross[k, l] * p[k]
            gamma[l] = direct[l] * p[l] / acc
        done = True
        rmax = 0.0
        for l in range(L):
            q = _local_rule(tsinr[l], gamma[l], p[l], p_max[l])
            d = abs(q - p[l])
            if d > tol * q:
                done = False
            if d > rmax:
                rmax = d
            p_new[l] = q
        if residuals.shape[0] >= it:
            residuals[it - 1] = rmax
        p[:] = p_new
        if done:
            return p, it, True
    return p, max_iter, False


@njit(cache=True)
def settle_multicast(tsinr, p_start, p_max, own, cross, noise, group_ptr, tol, max_iter,
                     residuals):
    """Receivers of group ``l`` are ``group_ptr[l]:group_ptr[l+1]``."""
    L = p_start.shape[0]
    R = own.shape[0]
    p = p_start.copy()
    gamma = np.empty(R)
    p_new = np.empty(L)
    for it in range(1, max_iter + 1):
        for l in range(L):
            for m in range(group_ptr[l], group_ptr[l + 1]):
                acc = noise[m]
                for k in range(L):
                    acc += cross[k, m] * p[k]
                gamma[m] = own[m] * p[l] / acc
        done = True
        rmax = 0.0
        for l in range(L):
            g = np.inf
            for m in range(group_ptr[l], group_ptr[l + 1]):
                if gamma[m] < g:
                    g = gamma[m]
            q = _local_rule(tsinr[l], g, p[l], p_max[l])
            d = abs(q - p[l])
            if d > tol * q:
                done = False
            if d > rmax:
                rmax = d
            p_new[l] = q
        if residuals.shape[0] >= it:
            residuals[it - 1] = rmax
        p[:] = p_new
        if done:
            return p, it, True
    return p, max_iter, False
