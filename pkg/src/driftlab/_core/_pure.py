"""Pure-Python kernels: the fallback backend for the compiled core.

Every function here has a twin in ``_speed.pyx`` with identical arithmetic,
statement for statement, so the two backends produce bitwise-equal results
(verified by tests/test_core_parity.py). Keep the loops explicit: numpy
reductions use pairwise summation and would break that guarantee.

State layouts (float64 arrays owned by the detector classes):
    DDM state:  [n, p, p_min, s_min]
    PH  state:  [n, mean, m, m_min]
"""

from __future__ import annotations

import math

BACKEND = "pure"

DDM_N, DDM_P, DDM_PMIN, DDM_SMIN = 0, 1, 2, 3
PH_N, PH_MEAN, PH_M, PH_MMIN = 0, 1, 2, 3

_MARGIN_CLAMP = 500.0


def ddm_update(state, error, warmup):
    """Advance DDM by one binary error; returns 0=none, 1=warning, 2=drift.

    Minima update and level checks start at ``n >= warmup``. Comparisons are
    strict so a zero-error stream (p_min = s_min = 0) never alarms.
    """
    n = state[DDM_N] + 1.0
    p = state[DDM_P] + (error - state[DDM_P]) / n
    state[DDM_N] = n
    state[DDM_P] = p
    if n < warmup:
        return 0
    s = math.sqrt(p * (1.0 - p) / n)
    if p + s < state[DDM_PMIN] + state[DDM_SMIN]:
        state[DDM_PMIN] = p
        state[DDM_SMIN] = s
    level = p + s
    if level > state[DDM_PMIN] + 3.0 * state[DDM_SMIN]:
        return 2
    if level > state[DDM_PMIN] + 2.0 * state[DDM_SMIN]:
        return 1
    return 0


def ph_update(state, value, delta, lam):
    """Advance Page-Hinkley by one value; returns 0=none, 2=drift."""
    n = state[PH_N] + 1.0
    mean = state[PH_MEAN] + (value - state[PH_MEAN]) / n
    m = state[PH_M] + (value - mean - delta)
    state[PH_N] = n
    state[PH_MEAN] = mean
    state[PH_M] = m
    if m < state[PH_MMIN]:
        state[PH_MMIN] = m
    if m - state[PH_MMIN] > lam:
        return 2
    return 0


def adwin_should_drop(counts, sums, n_buckets, delta):
    """Scan every bucket-boundary split of the ADWIN window, oldest first.

    ``counts``/``sums`` are oldest-first per bucket. Returns 1 when some split
    W0|W1 has |mean(W0) - mean(W1)| >= eps_cut with
    eps_cut = sqrt(ln(4/delta') / (2m)), delta' = delta/n and m the harmonic
    mean of |W0| and |W1|; the caller then drops the oldest bucket and rescans.
    """
    if n_buckets < 2:
        return 0
    total_n = 0.0
    total_sum = 0.0
    for i in range(n_buckets):
        total_n += counts[i]
        total_sum += sums[i]
    delta_prime = delta / total_n
    log_term = math.log(4.0 / delta_prime)
    n0 = 0.0
    s0 = 0.0
    for i in range(n_buckets - 1):
        n0 += counts[i]
        s0 += sums[i]
        n1 = total_n - n0
        s1 = total_sum - s0
        m = 2.0 * n0 * n1 / (n0 + n1)
        eps = math.sqrt(log_term / (2.0 * m))
        diff = s0 / n0 - s1 / n1
        if diff < 0.0:
            diff = -diff
        if diff >= eps:
            return 1
    return 0


def linear_margin(w, bias, x):
    """w . x + bias over contiguous float64 vectors."""
    z = bias
    for j in range(len(w)):
        z += w[j] * x[j]
    return z


def logloss_step(w, bias, x, y, lr):
    """One SGD step on log-loss for a linear model; mutates w, returns new bias.

    The margin is clamped before the sigmoid so parameters stay finite for any
    input scale.
    """
    z = bias
    for j in range(len(w)):
        z += w[j] * x[j]
    if z > _MARGIN_CLAMP:
        z = _MARGIN_CLAMP
    elif z < -_MARGIN_CLAMP:
        z = -_MARGIN_CLAMP
    p = 1.0 / (1.0 + math.exp(-z))
    g = p - y
    for j in range(len(w)):
        w[j] -= lr * g * x[j]
    return bias - lr * g


def pegasos_step(w, bias, x, y, lam, t):
    """One Pegasos step on hinge loss; mutates w, returns new bias.

    Learning rate 1/(lam*(t+1)) with t the 1-based step count, followed by
    projection onto the ball of radius 1/sqrt(lam). Bias is unregularized and
    unprojected.
    """
    eta = 1.0 / (lam * (t + 1.0))
    sign = 1.0 if y > 0.5 else -1.0
    z = bias
    for j in range(len(w)):
        z += w[j] * x[j]
    shrink = 1.0 - eta * lam
    for j in range(len(w)):
        w[j] *= shrink
    if sign * z < 1.0:
        for j in range(len(w)):
            w[j] += eta * sign * x[j]
        bias = bias + eta * sign
    norm_sq = 0.0
    for j in range(len(w)):
        norm_sq += w[j] * w[j]
    limit_sq = 1.0 / lam
    if norm_sq > limit_sq:
        scale = math.sqrt(limit_sq / norm_sq)
        for j in range(len(w)):
            w[j] *= scale
    return bias
