"""Closed-form references used to check the solvers.

Nothing here imports the CME code: the isomerization results use the
independence of molecules, the bridge uses brute-force summation over
intermediate states, and pure birth is a Poisson process.
"""

from __future__ import annotations

import math

import numpy as np


def isomerization_switch(k_f, k_b, t):
    """``(P(A->B), P(B->A))`` for one molecule of ``A <-> B`` after time ``t``."""
    lam = k_f + k_b
    decay = math.exp(-lam * t)
    return k_f / lam * (1.0 - decay), k_b / lam * (1.0 - decay)


def isomerization_transition(n_total, k_f, k_b, t):
    """Matrix ``P[a0, a1]`` of going from ``a0`` to ``a1`` molecules of A in time ``t``.

    Every molecule flips independently, so ``a1`` is a sum of two binomials.
    """
    p_ab, p_ba = isomerization_switch(k_f, k_b, t)
    n = n_total
    P = np.zeros((n + 1, n + 1))
    for a0 in range(n + 1):
        b0 = n - a0
        stay = [math.comb(a0, k) * (1 - p_ab) ** k * p_ab ** (a0 - k) for k in range(a0 + 1)]
        come = [math.comb(b0, k) * p_ba**k * (1 - p_ba) ** (b0 - k) for k in range(b0 + 1)]
        for i, ps in enumerate(stay):
            for k, pc in enumerate(come):
                P[a0, i + k] += ps * pc
    return P


def isomerization_bridge(n_total, k_f, k_b, a0, a1, dt, s):
    """``P(A_s = a | A_0 = a0, A_dt = a1)`` for ``a = 0..n_total``."""
    left = isomerization_transition(n_total, k_f, k_b, s)[a0]
    right = isomerization_transition(n_total, k_f, k_b, dt - s)[:, a1]
    joint = left * right
    return joint / joint.sum()


def birth_probability(rate, dt, k):
    """Probability that an immigration process ``0 -> A`` fires exactly ``k`` times in ``dt``."""
    mu = rate * dt
    return math.exp(-mu) * mu**k / math.factorial(k)


def gamma_moments(shape, rate):
    return shape / rate, shape / rate**2
