# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: the fast backend for the core.

Arithmetic mirrors ``_pure.py`` statement for statement so both backends are
bitwise-identical on the same inputs (see tests/test_core_parity.py).
"""

from libc.math cimport sqrt, exp, log

BACKEND = "compiled"

DEF DDM_N = 0
DEF DDM_P = 1
DEF DDM_PMIN = 2
DEF DDM_SMIN = 3
DEF PH_N = 0
DEF PH_MEAN = 1
DEF PH_M = 2
DEF PH_MMIN = 3

cdef double _MARGIN_CLAMP = 500.0


def ddm_update(double[::1] state, double error, long warmup):
    cdef double n = state[DDM_N] + 1.0
    cdef double p = state[DDM_P] + (error - state[DDM_P]) / n
    cdef double s, level
    state[DDM_N] = n
    state[DDM_P] = p
    if n < warmup:
        return 0
    s = sqrt(p * (1.0 - p) / n)
    if p + s < state[DDM_PMIN] + state[DDM_SMIN]:
        state[DDM_PMIN] = p
        state[DDM_SMIN] = s
    level = p + s
    if level > state[DDM_PMIN] + 3.0 * state[DDM_SMIN]:
        return 2
    if level > state[DDM_PMIN] + 2.0 * state[DDM_SMIN]:
        return 1
    return 0


def ph_update(double[::1] state, double value, double delta, double lam):
    cdef double n = state[PH_N] + 1.0
    cdef double mean = state[PH_MEAN] + (value - state[PH_MEAN]) / n
    cdef double m = state[PH_M] + (value - mean - delta)
    state[PH_N] = n
    state[PH_MEAN] = mean
    state[PH_M] = m
    if m < state[PH_MMIN]:
        state[PH_MMIN] = m
    if m - state[PH_MMIN] > lam:
        return 2
    return 0


def adwin_should_drop(double[::1] counts, double[::1] sums, long n_buckets, double delta):
    cdef double total_n = 0.0
    cdef double total_sum = 0.0
    cdef double delta_prime, log_term, n0, s0, n1, s1, m, eps, diff
    cdef long i
    if n_buckets < 2:
        return 0
    for i in range(n_buckets):
        total_n += counts[i]
        total_sum += sums[i]
    delta_prime = delta / total_n
    log_term = log(4.0 / delta_prime)
    n0 = 0.0
    s0 = 0.0
    for i in range(n_buckets - 1):
        n0 += counts[i]
        s0 += sums[i]
        n1 = total_n - n0
        s1 = total_sum - s0
        m = 2.0 * n0 * n1 / (n0 + n1)
        eps = sqrt(log_term / (2.0 * m))
        diff = s0 / n0 - s1 / n1
        if diff < 0.0:
            diff = -diff
        if diff >= eps:
            return 1
    return 0


def linear_margin(double[::1] w, double bias, double[::1] x):
    cdef double z = bias
    cdef long j
    for j in range(w.shape[0]):
        z += w[j] * x[j]
    return z


def logloss_step(double[::1] w, double bias, double[::1] x, double y, double lr):
    cdef double z = bias
    cdef double p, g
    cdef long j
    for j in range(w.shape[0]):
        z += w[j] * x[j]
    if z > _MARGIN_CLAMP:
        z = _MARGIN_CLAMP
    elif z < -_MARGIN_CLAMP:
        z = -_MARGIN_CLAMP
    p = 1.0 / (1.0 + exp(-z))
    g = p - y
    for j in range(w.shape[0]):
        w[j] -= lr * g * x[j]
    return bias - lr * g


def pegasos_step(double[::1] w, double bias, double[::1] x, double y, double lam, long t):
    cdef double eta = 1.0 / (lam * (t + 1.0))
    cdef double sign = 1.0 if y > 0.5 else -1.0
    cdef double z = bias
    cdef double shrink, norm_sq, limit_sq, scale
    cdef long j
    for j in range(w.shape[0]):
        z += w[j] * x[j]
    shrink = 1.0 - eta * lam
    for j in range(w.shape[0]):
        w[j] *= shrink
    if sign * z < 1.0:
        for j in range(w.shape[0]):
            w[j] += eta * sign * x[j]
        bias = bias + eta * sign
    norm_sq = 0.0
    for j in range(w.shape[0]):
        norm_sq += w[j] * w[j]
    limit_sq = 1.0 / lam
    if norm_sq > limit_sq:
        scale = sqrt(limit_sq / norm_sq)
        for j in range(w.shape[0]):
            w[j] *= scale
    return bias
