"""Full-conditional draws for the hierarchical model.

Gaussian-conjugate and single-kernel conditionals are drawn exactly; all
other conditionals go through the slice/independence sampler in
:mod:`tailgibbs._slice`, started at the previous value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _chain
from ._slice import OK
from .model import HierModel


class SliceError(RuntimeError):
    """Shrinkage ran out of attempts; carries the conditioning values."""

    def __init__(self, message: str, theta: float | None = None, x_prev=None):
        super().__init__(message)
        self.theta = theta
        self.x_prev = x_prev


@dataclass(frozen=True)
class SliceConfig:
    """Tuning for the univariate slice sampler.

    ``initial_width=None`` means max(scale1, scale2) of the model.
    ``n_sweeps`` sweeps are made per conditional draw inside a chain and
    ``n_burn`` sweeps when a fresh draw is started from the mode.
    """

    initial_width: float | None = None
    max_stepout: int = 200
    max_shrink: int = 200
    n_sweeps: int = 3
    n_burn: int = 12

    def __post_init__(self) -> None:
        if self.initial_width is not None and not self.initial_width > 0:
            raise ValueError("initial_width must be positive")
        if self.max_stepout < 1 or self.n_sweeps < 1 or self.n_burn < 1:
            raise ValueError("max_stepout, n_sweeps and n_burn must be positive")
        if self.max_shrink < 50:
            raise ValueError("max_shrink must be at least 50")

    def width_for(self, model: HierModel) -> float:
        if self.initial_width is not None:
            return float(self.initial_width)
        return max(model.f1.scale, model.f2.scale)


DEFAULT_SLICE = SliceConfig()


class Packed(NamedTuple):
    k1: int
    s1: float
    b1: float
    k2: int
    s2: float
    b2: float
    yf: np.ndarray
    off: np.ndarray
    wk: np.ndarray
    ws: np.ndarray
    wb: np.ndarray
    wc: np.ndarray
    wa: np.ndarray
    xbuf: np.ndarray


def pack(model: HierModel) -> Packed:
    """Flatten a model into the arrays the jitted kernels take."""
    yf = np.ascontiguousarray(model.y_flat, dtype=np.float64)
    off = np.ascontiguousarray(model.offsets, dtype=np.int64)
    size = yf.size + model.m + 2
    return Packed(
        model.f1.code, model.f1.scale, model.f1.beta_or_zero,
        model.f2.code, model.f2.scale, model.f2.beta_or_zero,
        yf, off,
        np.zeros(size, dtype=np.int64), np.ones(size), np.zeros(size), np.zeros(size), np.zeros(size),
        np.zeros(model.m),
    )


def _model_args(p: Packed):
    return (p.k1, p.s1, p.b1, p.k2, p.s2, p.b2, p.yf, p.off)


def _slice_args(cfg: SliceConfig, model: HierModel):
    return (cfg.width_for(model), int(cfg.max_stepout), int(cfg.max_shrink))


def _work(p: Packed):
    return (p.wk, p.ws, p.wb, p.wc, p.wa)


def _check_dim(model: HierModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.m,):
        raise ValueError(f"latent vector has shape {x.shape}, model needs ({model.m},)")
    return x


def sample_x_given_theta(model: HierModel, theta: float, x_prev, rng: np.random.Generator,
                         cfg: SliceConfig = DEFAULT_SLICE) -> np.ndarray:
    """X | y, Theta=theta; each coordinate updated from ``x_prev``."""
    x_prev = _check_dim(model, x_prev)
    p = pack(model)
    out = np.empty(model.m)
    for i in range(model.m):
        xi, st, _ = _chain.draw_x_row(i, float(theta), float(x_prev[i]), False, int(cfg.n_sweeps),
                                      *_model_args(p), *_slice_args(cfg, model), rng, *_work(p))
        if st != OK:
            raise SliceError(f"slice shrinkage exhausted drawing X_{i + 1} | theta={theta}", theta, x_prev)
        out[i] = xi
    return out


def fresh_x_given_theta(model: HierModel, theta: float, rng: np.random.Generator,
                        cfg: SliceConfig = DEFAULT_SLICE) -> np.ndarray:
    """X | y, theta started from the conditional mode, ``cfg.n_burn`` sweeps."""
    p = pack(model)
    x = np.empty(model.m)
    st = _chain.init_x(float(theta), x, int(cfg.n_burn), *_model_args(p), *_slice_args(cfg, model), rng, *_work(p))
    if st != OK:
        raise SliceError(f"slice shrinkage exhausted initialising X | theta={theta}", theta, None)
    return x


def _theta_draw(code: int, rho: float, model: HierModel, v, rng, cfg, theta_start):
    v = _check_dim(model, v)
    p = pack(model)
    t, st, _ = _chain.draw_theta(code, float(rho), v, float(theta_start), int(cfg.n_sweeps), *_model_args(p),
                                 *_slice_args(cfg, model), rng, *_work(p))
    if st != OK:
        raise SliceError("slice shrinkage exhausted drawing Theta", theta_start, v)
    return float(t)


def sample_theta_given_x(model: HierModel, x, rng: np.random.Generator, cfg: SliceConfig = DEFAULT_SLICE,
                         theta_start: float | None = None) -> float:
    """Theta | X=x under the flat prior (density prop. to prod_i f2(x_i - theta))."""
    x = _check_dim(model, x)
    start = float(np.mean(x)) if theta_start is None else theta_start
    return _theta_draw(_chain.CENTRED, 0.0, model, x, rng, cfg, start)


def sample_theta_given_xtilde(model: HierModel, xt, rng: np.random.Generator, cfg: SliceConfig = DEFAULT_SLICE,
                              theta_start: float | None = None) -> float:
    """Theta | y, X~=xt (density prop. to prod_ij f1(y_ij - xt_i - theta))."""
    xt = _check_dim(model, xt)
    start = float(np.mean(model.y_flat) - np.mean(xt)) if theta_start is None else theta_start
    return _theta_draw(_chain.NONCENTRED, 0.0, model, xt, rng, cfg, start)


def sample_theta_given_u(model: HierModel, u, rho: float, rng: np.random.Generator,
                         cfg: SliceConfig = DEFAULT_SLICE, theta_start: float = 0.0) -> float:
    """Theta | y, U=u with U = X - rho Theta."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    code = _chain.CENTRED if rho == 0.0 else _chain.NONCENTRED if rho == 1.0 else _chain.PARTIAL
    return _theta_draw(code, rho, model, u, rng, cfg, theta_start)


def q_rate(y: float, x: float, likelihood_rate: bool = False, scale1: float = 1.0) -> float:
    """Rate of the Gamma(1, rate) conditional of the auxiliary precision."""
    r2 = ((y - x) / scale1) ** 2
    return 0.5 * r2 if likelihood_rate else 0.5 * (1.0 + r2)


def sample_q_given_xy(y: float, x: float, rng: np.random.Generator, likelihood_rate: bool = False,
                      scale1: float = 1.0, size: int | None = None):
    """Q | y, x for Z1 = scale1 * V / sqrt(Q), Q ~ Ga(1/2, 1/2).

    The conjugate update is Ga(1, (1 + ((y-x)/scale1)^2) / 2).  With
    ``likelihood_rate=True`` the prior's 1/2 is dropped from the rate.
    """
    rate = q_rate(y, x, likelihood_rate, scale1)
    if rate <= 0:
        raise ValueError("Q rate is zero; the likelihood-rate variant needs y != x")
    return rng.gamma(1.0, 1.0 / rate, size=size)


def x_given_theta_q_moments(y: float, theta: float, q: float, scale1: float = 1.0,
                            scale2: float = 1.0) -> tuple[float, float]:
    """Mean and variance of X | y, theta, q (reduces to theta/(q+1) + qy/(q+1), 1/(q+1))."""
    if not q > 0:
        raise ValueError("q must be positive")
    a = q / scale1**2
    b = 1.0 / scale2**2
    prec = a + b
    return (a * y + b * theta) / prec, 1.0 / prec


def sample_x_given_theta_q(y: float, theta: float, q: float, rng: np.random.Generator,
                           scale1: float = 1.0, scale2: float = 1.0, size: int | None = None):
    mean, var = x_given_theta_q_moments(y, theta, q, scale1, scale2)
    return mean + math.sqrt(var) * rng.standard_normal(size)


def x_draws(model: HierModel, theta: float, n: int, rng: np.random.Generator, cfg: SliceConfig = DEFAULT_SLICE,
            fresh: bool = True) -> np.ndarray:
    """``n`` draws of X_1 | y, theta for a model with m = 1.

    ``fresh=True`` restarts each draw from the mode (independent draws);
    otherwise the draws form a slice-sampler chain.
    """
    if model.m != 1:
        raise ValueError("x_draws needs m = 1")
    p = pack(model)
    out = np.empty(int(n))
    st, r = _chain.x_draw_batch(float(theta), int(n), bool(fresh), int(cfg.n_burn), int(cfg.n_sweeps),
                                *_model_args(p), *_slice_args(cfg, model), rng, *_work(p), out)
    if st != OK:
        raise SliceError(f"slice shrinkage exhausted at draw {r} of X | theta={theta}", theta, None)
    return out
