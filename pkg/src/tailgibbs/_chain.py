"""Jitted Gibbs transitions for the replicated scalar model.

The model crosses the numba boundary as flat arrays: ``yf`` holds every
observation, row ``i`` owns ``yf[off[i]:off[i+1]]``.  Work buffers ``wk, ws,
wb, wc, wa`` (kinds, scales, betas, coefs, anchors) are preallocated by the
caller and reused for every conditional.
"""

import math

import numpy as np

from ._accel import jit
from ._slice import OK, mode_start, sample_anchored

CENTRED = 0
NONCENTRED = 1
PARTIAL = 2
GROUPED = 3
HYBRID = 4


@jit
def _x_terms(i, theta, k1, s1, b1, k2, s2, b2, yf, off, wk, ws, wb, wc, wa):
    n = 0
    for j in range(off[i], off[i + 1]):
        wk[n] = k1
        ws[n] = s1
        wb[n] = b1
        wc[n] = 1.0
        wa[n] = yf[j]
        n += 1
    wk[n] = k2
    ws[n] = s2
    wb[n] = b2
    wc[n] = 1.0
    wa[n] = theta
    return n + 1


@jit
def draw_x_row(i, theta, x_start, fresh, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
               width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa):
    n = _x_terms(i, theta, k1, s1, b1, k2, s2, b2, yf, off, wk, ws, wb, wc, wa)
    if fresh:
        x_start = mode_start(wk, ws, wb, wc, wa, n)
    return sample_anchored(wk, ws, wb, wc, wa, n, x_start, width, max_stepout, max_shrink, n_sweeps, rng)


@jit
def draw_theta(code, rho, x, theta_start, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
               width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa):
    """Theta given the latent block, expressed in the sampler's own frame.

    ``x`` holds X for the centred kernel, X~ = X - theta for the non-centred
    kernel and U = X - rho theta for the partially centred kernel.
    """
    m = off.size - 1
    n = 0
    if code == CENTRED:
        for i in range(m):
            wk[n] = k2
            ws[n] = s2
            wb[n] = b2
            wc[n] = 1.0
            wa[n] = x[i]
            n += 1
    elif code == NONCENTRED:
        for i in range(m):
            for j in range(off[i], off[i + 1]):
                wk[n] = k1
                ws[n] = s1
                wb[n] = b1
                wc[n] = 1.0
                wa[n] = yf[j] - x[i]
                n += 1
    else:
        for i in range(m):
            for j in range(off[i], off[i + 1]):
                wk[n] = k1
                ws[n] = s1
                wb[n] = b1
                wc[n] = rho
                wa[n] = yf[j] - x[i]
                n += 1
            wk[n] = k2
            ws[n] = s2
            wb[n] = b2
            wc[n] = 1.0 - rho
            wa[n] = x[i]
            n += 1
    return sample_anchored(wk, ws, wb, wc, wa, n, theta_start, width, max_stepout, max_shrink, n_sweeps, rng)


@jit
def _grouped_update(theta, x, q, likelihood_rate, s1, s2, yf, off, rng):
    """(Theta, Q) | X jointly (independent given X), then X | Theta, Q."""
    m = off.size - 1
    xbar = 0.0
    for i in range(m):
        xbar += x[i]
    xbar /= m
    theta = xbar + s2 * rng.standard_normal() / math.sqrt(m)
    inv_s1sq = 1.0 / (s1 * s1)
    for i in range(m):
        for j in range(off[i], off[i + 1]):
            r = yf[j] - x[i]
            if likelihood_rate:
                rate = 0.5 * r * r * inv_s1sq
                if rate < 1e-300:
                    rate = 1e-300
            else:
                rate = 0.5 * (1.0 + r * r * inv_s1sq)
            q[j] = rng.gamma(1.0, 1.0 / rate)
    inv_s2sq = 1.0 / (s2 * s2)
    for i in range(m):
        prec = inv_s2sq
        lin = theta * inv_s2sq
        for j in range(off[i], off[i + 1]):
            prec += q[j] * inv_s1sq
            lin += q[j] * yf[j] * inv_s1sq
        x[i] = lin / prec + rng.standard_normal() / math.sqrt(prec)
    return theta


@jit
def step(code, rho, p_mix, likelihood_rate, theta, x, q, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
         width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa, xbuf):
    """One Gibbs transition; ``x`` (model scale) and ``q`` are updated in place.

    Returns ``(theta, status, mh_accepts)``.
    """
    m = off.size - 1
    if code == GROUPED:
        theta = _grouped_update(theta, x, q, likelihood_rate, s1, s2, yf, off, rng)
        return theta, OK, 0
    if code == HYBRID:
        if rng.random() < p_mix:
            code = CENTRED
        else:
            code = NONCENTRED
    accepts = 0
    for i in range(m):
        xi, st, acc = draw_x_row(i, theta, x[i], False, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
                                 width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa)
        accepts += acc
        if st != OK:
            return theta, st, accepts
        x[i] = xi
    if code == CENTRED:
        for i in range(m):
            xbuf[i] = x[i]
    elif code == NONCENTRED:
        for i in range(m):
            xbuf[i] = x[i] - theta
    else:
        for i in range(m):
            xbuf[i] = x[i] - rho * theta
    new_theta, st, acc = draw_theta(code, rho, xbuf, theta, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
                                    width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa)
    accepts += acc
    if st != OK:
        return theta, st, accepts
    if code == NONCENTRED:
        for i in range(m):
            x[i] = xbuf[i] + new_theta
    elif code == PARTIAL:
        for i in range(m):
            x[i] = xbuf[i] + rho * new_theta
    return new_theta, OK, accepts


@jit
def init_x(theta0, x, n_burn, k1, s1, b1, k2, s2, b2, yf, off, width, max_stepout, max_shrink,
           rng, wk, ws, wb, wc, wa):
    """Fresh draw of X | theta0 from a mode start followed by burn-in sweeps."""
    m = off.size - 1
    for i in range(m):
        xi, st, acc = draw_x_row(i, theta0, 0.0, True, n_burn, k1, s1, b1, k2, s2, b2, yf, off,
                                 width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa)
        if st != OK:
            return st
        x[i] = xi
    return OK


@jit
def run(code, rho, p_mix, likelihood_rate, theta0, x, q, n_iter, record_x, n_sweeps,
        k1, s1, b1, k2, s2, b2, yf, off, width, max_stepout, max_shrink, rng,
        wk, ws, wb, wc, wa, xbuf, thetas, xs):
    """Run ``n_iter`` transitions from ``(theta0, x, q)``.

    Returns ``(status, failed_iteration, mh_accepts)``; ``failed_iteration``
    is -1 on success.
    """
    m = off.size - 1
    theta = theta0
    accepts = 0
    for it in range(n_iter):
        theta, st, acc = step(code, rho, p_mix, likelihood_rate, theta, x, q, n_sweeps, k1, s1, b1, k2, s2, b2,
                              yf, off, width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa, xbuf)
        accepts += acc
        if st != OK:
            return st, it, accepts
        thetas[it] = theta
        if record_x:
            for i in range(m):
                xs[it, i] = x[i]
    return OK, -1, accepts


@jit
def first_entry(code, rho, p_mix, likelihood_rate, theta0, x, q, radius, max_iter, n_sweeps,
                k1, s1, b1, k2, s2, b2, yf, off, width, max_stepout, max_shrink, rng,
                wk, ws, wb, wc, wa, xbuf):
    """First n with |theta_n| <= radius, or -1 if censored at ``max_iter``."""
    if abs(theta0) <= radius:
        return 0, OK
    theta = theta0
    for it in range(max_iter):
        theta, st, acc = step(code, rho, p_mix, likelihood_rate, theta, x, q, n_sweeps, k1, s1, b1, k2, s2, b2,
                              yf, off, width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa, xbuf)
        if st != OK:
            return -1, st
        if abs(theta) <= radius:
            return it + 1, OK
    return -1, OK


@jit
def one_step_batch(code, rho, p_mix, likelihood_rate, theta0, x0, n_rep, n_burn, n_sweeps,
                   k1, s1, b1, k2, s2, b2, yf, off, width, max_stepout, max_shrink, rng,
                   wk, ws, wb, wc, wa, xbuf, theta_out, x_out):
    """Independent one-step transitions from a fixed start.

    For every kernel except ``GROUPED`` the start is theta0 and X is
    refreshed from L(X | y, theta0) each replicate.  The grouped kernel
    starts from the supplied latent ``x0`` (its monitored chain is X).
    """
    m = off.size - 1
    nq = yf.size
    x = np.empty(m)
    q = np.ones(nq)
    for r in range(n_rep):
        if code == GROUPED:
            for i in range(m):
                x[i] = x0[i]
            th = _grouped_update(theta0, x, q, likelihood_rate, s1, s2, yf, off, rng)
        else:
            st = init_x(theta0, x, n_burn, k1, s1, b1, k2, s2, b2, yf, off, width, max_stepout, max_shrink,
                        rng, wk, ws, wb, wc, wa)
            if st != OK:
                return st, r
            c = code
            if c == HYBRID:
                if rng.random() < p_mix:
                    c = CENTRED
                else:
                    c = NONCENTRED
            if c == CENTRED:
                for i in range(m):
                    xbuf[i] = x[i]
            elif c == NONCENTRED:
                for i in range(m):
                    xbuf[i] = x[i] - theta0
            else:
                for i in range(m):
                    xbuf[i] = x[i] - rho * theta0
            th, st, acc = draw_theta(c, rho, xbuf, theta0, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
                                     width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa)
            if st != OK:
                return st, r
            if c == NONCENTRED:
                for i in range(m):
                    x[i] = xbuf[i] + th
            elif c == PARTIAL:
                for i in range(m):
                    x[i] = xbuf[i] + rho * th
        theta_out[r] = th
        for i in range(m):
            x_out[r, i] = x[i]
    return OK, -1


@jit
def x_draw_batch(theta, n_rep, fresh, n_burn, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
                 width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa, out):
    """Repeated draws of X_1 | y, theta: independent (``fresh``) or chained."""
    x = 0.0
    for r in range(n_rep):
        if fresh or r == 0:
            xi, st, acc = draw_x_row(0, theta, 0.0, True, n_burn, k1, s1, b1, k2, s2, b2, yf, off,
                                     width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa)
        else:
            xi, st, acc = draw_x_row(0, theta, x, False, n_sweeps, k1, s1, b1, k2, s2, b2, yf, off,
                                     width, max_stepout, max_shrink, rng, wk, ws, wb, wc, wa)
        if st != OK:
            return st, r
        x = xi
        out[r] = x
    return OK, -1
