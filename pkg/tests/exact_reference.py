"""Exact reference chain for the Cauchy-Gaussian model (y = 0, flat prior).

X | theta is drawn by rejection from the N(theta, s^2) proposal with
acceptance probability 1 / (1 + x^2), which is the Cauchy kernel of the
observation error.  Theta | X is N(X, s^2).  No slice sampling and no
shared code with the package, so it checks the package's centred kernel
independently.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def exact_centred_chain(theta0, n, seed, s=math.sqrt(5.0)):
    np.random.seed(seed)
    th = theta0
    out = np.empty(n)
    for i in range(n):
        while True:
            x = th + s * np.random.standard_normal()
            if np.random.random() < 1.0 / (1.0 + x * x):
                break
        th = x + s * np.random.standard_normal()
        out[i] = th
    return out
