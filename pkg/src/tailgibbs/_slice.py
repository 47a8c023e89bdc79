"""Univariate sampler for targets that are products of symmetric kernels.

Every full conditional of the scalar hierarchical model has the form

    log pi(t) = sum_k log f_k(c_k * t - a_k)

where ``f_k`` is one of the error densities, ``c_k`` a coefficient and
``a_k`` an anchor.  One sweep is an independence Metropolis step whose
proposal is the equal-weight mixture of the kernels (this is what lets the
chain hop between well separated modes, e.g. the (C,C) model far in the
tails) followed by a stepping-out/shrinkage slice update.

Two cases are drawn exactly: a single active term, and all-Gaussian terms.
"""

import math

import numpy as np

from ._accel import jit
from ._dens import GAUSS, draw, logpdf

OK = 0
SHRINK_EXHAUSTED = 1

_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


@jit
def log_target(kinds, scales, betas, coefs, anchors, n, t):
    s = 0.0
    for k in range(n):
        c = coefs[k]
        if c != 0.0:
            s += logpdf(kinds[k], scales[k], betas[k], c * t - anchors[k])
    return s


@jit
def _log_mixture(kinds, scales, betas, coefs, anchors, n, n_active, t):
    m = -np.inf
    for k in range(n):
        c = coefs[k]
        if c != 0.0:
            v = logpdf(kinds[k], scales[k], betas[k], c * t - anchors[k]) + math.log(abs(c))
            if v > m:
                m = v
    if m == -np.inf:
        return m
    acc = 0.0
    for k in range(n):
        c = coefs[k]
        if c != 0.0:
            v = logpdf(kinds[k], scales[k], betas[k], c * t - anchors[k]) + math.log(abs(c))
            acc += math.exp(v - m)
    return m + math.log(acc) - math.log(n_active)


@jit
def _count_active(coefs, n):
    cnt = 0
    for k in range(n):
        if coefs[k] != 0.0:
            cnt += 1
    return cnt


@jit
def _all_gauss(kinds, coefs, n):
    for k in range(n):
        if coefs[k] != 0.0 and kinds[k] != GAUSS:
            return False
    return True


@jit
def mode_start(kinds, scales, betas, coefs, anchors, n):
    """Deterministic high-density starting point.

    Best of the kernel centres and a golden-section search between the
    outermost centres.
    """
    lo = np.inf
    hi = -np.inf
    best = 0.0
    best_val = -np.inf
    for k in range(n):
        c = coefs[k]
        if c != 0.0:
            p = anchors[k] / c
            v = log_target(kinds, scales, betas, coefs, anchors, n, p)
            if v > best_val:
                best_val = v
                best = p
            if p < lo:
                lo = p
            if p > hi:
                hi = p
    if hi > lo:
        a = lo
        b = hi
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1 = log_target(kinds, scales, betas, coefs, anchors, n, x1)
        f2 = log_target(kinds, scales, betas, coefs, anchors, n, x2)
        tol = 1e-12 * (abs(a) + abs(b)) + 1e-12
        for _ in range(200):
            if b - a <= tol:
                break
            if f1 >= f2:
                b = x2
                x2 = x1
                f2 = f1
                x1 = b - _GOLDEN * (b - a)
                f1 = log_target(kinds, scales, betas, coefs, anchors, n, x1)
            else:
                a = x1
                x1 = x2
                f1 = f2
                x2 = a + _GOLDEN * (b - a)
                f2 = log_target(kinds, scales, betas, coefs, anchors, n, x2)
        mid = 0.5 * (a + b)
        v = log_target(kinds, scales, betas, coefs, anchors, n, mid)
        if v > best_val:
            best = mid
    return best


@jit
def sample_anchored(kinds, scales, betas, coefs, anchors, n, t0, width, max_stepout, max_shrink,
                    n_sweeps, rng):
    """One conditional draw.  Returns ``(t, status, mh_accepts)``."""
    n_active = _count_active(coefs, n)
    if n_active == 1:
        for k in range(n):
            c = coefs[k]
            if c != 0.0:
                return (anchors[k] + draw(kinds[k], scales[k], betas[k], rng)) / c, OK, 0
    if _all_gauss(kinds, coefs, n):
        prec = 0.0
        lin = 0.0
        for k in range(n):
            c = coefs[k]
            if c != 0.0:
                w2 = 1.0 / (scales[k] * scales[k])
                prec += c * c * w2
                lin += c * anchors[k] * w2
        return lin / prec + rng.standard_normal() / math.sqrt(prec), OK, 0

    t = t0
    lp = log_target(kinds, scales, betas, coefs, anchors, n, t)
    accepts = 0
    for _ in range(n_sweeps):
        # independence step from the kernel mixture
        pick = int(rng.random() * n_active)
        seen = 0
        prop = t
        for k in range(n):
            c = coefs[k]
            if c != 0.0:
                if seen == pick:
                    prop = (anchors[k] + draw(kinds[k], scales[k], betas[k], rng)) / c
                    break
                seen += 1
        lp_prop = log_target(kinds, scales, betas, coefs, anchors, n, prop)
        log_ratio = (lp_prop - _log_mixture(kinds, scales, betas, coefs, anchors, n, n_active, prop)) - (
            lp - _log_mixture(kinds, scales, betas, coefs, anchors, n, n_active, t)
        )
        if math.log(1.0 - rng.random()) < log_ratio:
            t = prop
            lp = lp_prop
            accepts += 1

        # slice update
        logy = lp - rng.exponential(1.0)
        left = t - width * rng.random()
        right = left + width
        j = int(max_stepout * rng.random())
        kk = max_stepout - 1 - j
        while j > 0 and log_target(kinds, scales, betas, coefs, anchors, n, left) > logy:
            left -= width
            j -= 1
        while kk > 0 and log_target(kinds, scales, betas, coefs, anchors, n, right) > logy:
            right += width
            kk -= 1
        found = False
        for _s in range(max_shrink):
            t1 = left + rng.random() * (right - left)
            lp1 = log_target(kinds, scales, betas, coefs, anchors, n, t1)
            if lp1 > logy:
                t = t1
                lp = lp1
                found = True
                break
            if t1 < t:
                left = t1
            else:
                right = t1
        if not found:
            return t, SHRINK_EXHAUSTED, accepts
    return t, OK, accepts
