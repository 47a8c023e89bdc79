"""Scalar density kernels shared by the jitted samplers.

Families are identified by small integer codes so they can cross the numba
boundary without objects.
"""

import math

from ._accel import jit

CAUCHY = 0
DEXP = 1
GAUSS = 2
EXPPOWER = 3

_LOG_PI = math.log(math.pi)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@jit
def logpdf(kind, scale, beta, x):
    z = x / scale
    if kind == CAUCHY:
        return -_LOG_PI - math.log(scale) - math.log1p(z * z)
    if kind == DEXP:
        return -math.log(2.0 * scale) - abs(z)
    if kind == GAUSS:
        return -_HALF_LOG_2PI - math.log(scale) - 0.5 * z * z
    return math.log(beta) - math.log(2.0 * scale) - math.lgamma(1.0 / beta) - abs(z) ** beta


@jit
def dlogpdf(kind, scale, beta, x):
    """Derivative of ``logpdf`` in ``x`` (the DEXP kink takes derivative 0)."""
    z = x / scale
    if kind == CAUCHY:
        return -2.0 * z / (scale * (1.0 + z * z))
    if kind == DEXP:
        if z > 0.0:
            return -1.0 / scale
        if z < 0.0:
            return 1.0 / scale
        return 0.0
    if kind == GAUSS:
        return -z / scale
    a = abs(z)
    if a == 0.0:
        return 0.0
    s = 1.0 if z > 0.0 else -1.0
    return -s * beta * a ** (beta - 1.0) / scale


@jit
def draw(kind, scale, beta, rng):
    if kind == CAUCHY:
        return scale * rng.standard_cauchy()
    if kind == DEXP:
        return rng.laplace(0.0, scale)
    if kind == GAUSS:
        return scale * rng.standard_normal()
    g = rng.gamma(1.0 / beta, 1.0)
    mag = scale * g ** (1.0 / beta)
    if rng.random() < 0.5:
        return -mag
    return mag
