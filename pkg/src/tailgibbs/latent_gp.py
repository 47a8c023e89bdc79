"""Latent Gaussian process with heavy-tailed observations.

    Y = X + Z1,   X = 1 Theta + Sigma^{1/2} Z2,

with Z1 i.i.d. from ``f1`` (standard Cauchy by default), Z2 standard
p-variate Gaussian and a flat prior on Theta.  X | y, theta is updated by
blocks of Metropolis-adjusted Langevin moves; Theta | X is exact Gaussian
(centred) or a univariate slice draw (non-centred).

All linear algebra goes through the Cholesky factor of Sigma; the precision
matrix is only formed for the coordinate-wise reference sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg

from . import _dens
from ._accel import jit
from ._slice import OK, sample_anchored
from .conditionals import DEFAULT_SLICE, SliceConfig, SliceError
from .errors import ErrorDist
from .kernels import Trace, make_rng


def build_ar1_cov(p: int, phi: float, marginal_var: float = 1.0) -> np.ndarray:
    """Sigma_ij = marginal_var * phi^|i-j| (stationary AR(1) covariance)."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if not -1.0 < phi < 1.0:
        raise ValueError(f"AR(1) coefficient must satisfy |phi| < 1, got {phi}")
    if not marginal_var > 0:
        raise ValueError("marginal_var must be positive")
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return marginal_var * np.power(float(phi), lag)


@dataclass(frozen=True, eq=False)
class LgpModel:
    """Sigma (p x p SPD), data y (length p) and observation law f1."""

    Sigma: np.ndarray
    y: np.ndarray
    f1: ErrorDist = field(default_factory=ErrorDist.cauchy)
    ar1: tuple[float, float] | None = None  # (phi, marginal_var) when built from an AR(1)

    def __post_init__(self) -> None:
        S = np.array(self.Sigma, dtype=float)
        y = np.atleast_1d(np.array(self.y, dtype=float))
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
            raise ValueError("Sigma must be a non-empty square matrix")
        if y.shape != (S.shape[0],):
            raise ValueError(f"y has shape {y.shape}, Sigma needs ({S.shape[0]},)")
        if not np.allclose(S, S.T, rtol=1e-12, atol=1e-12):
            raise ValueError("Sigma must be symmetric")
        try:
            chol = linalg.cho_factor(S, lower=True)
        except linalg.LinAlgError as exc:
            raise ValueError("Sigma is not positive definite") from exc
        S.setflags(write=False)
        y.setflags(write=False)
        prec_one = linalg.cho_solve(chol, np.ones(S.shape[0]))
        object.__setattr__(self, "Sigma", S)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_prec_one", prec_one)
        object.__setattr__(self, "_one_prec_one", float(prec_one.sum()))

    @classmethod
    def ar1(cls, y, phi: float, marginal_var: float = 1.0, f1: ErrorDist | None = None) -> LgpModel:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return cls(build_ar1_cov(y.size, phi, marginal_var), y, f1 or ErrorDist.cauchy(), (float(phi), float(marginal_var)))

    @property
    def p(self) -> int:
        return self.Sigma.shape[0]

    @property
    def one_prec_one(self) -> float:
        """1' Sigma^{-1} 1."""
        return self._one_prec_one

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Sigma^{-1} b via the Cholesky factor (b may be (p,) or (p, k))."""
        return linalg.cho_solve(self._chol, b)

    def sqrt_mul(self, z: np.ndarray) -> np.ndarray:
        """L z with Sigma = L L'."""
        L = np.tril(self._chol[0])
        return L @ z

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"f1": self.f1.to_json(), "y": self.y.tolist()}
        if self.ar1 is not None:
            out.update(p=self.p, phi=self.ar1[0], marginal_var=self.ar1[1])
        else:
            out["Sigma"] = self.Sigma.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> LgpModel:
        extra = set(obj) - {"f1", "y", "p", "phi", "marginal_var", "Sigma"}
        if extra:
            raise ValueError(f"unknown keys in latent GP model: {sorted(extra)}")
        f1 = ErrorDist.from_json(obj["f1"]) if "f1" in obj else ErrorDist.cauchy()
        y = np.asarray(obj["y"], dtype=float)
        if "Sigma" in obj:
            return cls(np.asarray(obj["Sigma"], dtype=float), y, f1)
        if "p" in obj and int(obj["p"]) != y.size:
            raise ValueError("p does not match the length of y")
        return cls.ar1(y, float(obj["phi"]), float(obj.get("marginal_var", 1.0)), f1)


def simulate_data(p: int, phi: float, marginal_var: float = 1.0, theta: float = 0.0, seed: int = 0,
                  f1: ErrorDist | None = None) -> tuple[LgpModel, np.ndarray]:
    """Draw X = 1 theta + Sigma^{1/2} Z2 and Y = X + Z1; returns (model, x)."""
    f1 = f1 or ErrorDist.cauchy()
    rng = np.random.default_rng(seed)
    Sigma = build_ar1_cov(p, phi, marginal_var)
    x = theta + np.linalg.cholesky(Sigma) @ rng.standard_normal(p)
    y = x + f1.sample(rng, p)
    return LgpModel(Sigma, y, f1, (float(phi), float(marginal_var))), x


def theta_given_x_moments(model: LgpModel, x) -> tuple[float, float]:
    """(1'S^-1 x / 1'S^-1 1, 1 / 1'S^-1 1)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.p:
        raise ValueError(f"x has {x.shape[-1]} coordinates, model needs {model.p}")
    s = model.one_prec_one
    return x @ model._prec_one / s, 1.0 / s


def theta_given_x(model: LgpModel, x, rng: np.random.Generator):
    """Exact draw from Theta | X = x (vectorised over leading rows of ``x``)."""
    mean, var = theta_given_x_moments(model, x)
    return mean + math.sqrt(var) * rng.standard_normal(np.shape(mean))


@jit
def _loglik_and_grad(kind, scale, beta, y, x, ll, grad):
    """Row-wise sum_i log f1(y_i - x_ri); gradient w.r.t. x written into ``grad``."""
    for r in range(x.shape[0]):
        total = 0.0
        for i in range(x.shape[1]):
            d = y[i] - x[r, i]
            total += _dens.logpdf(kind, scale, beta, d)
            grad[r, i] = -_dens.dlogpdf(kind, scale, beta, d)
        ll[r] = total


def _loglik_rows(model: LgpModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f = model.f1
    grad = np.empty_like(x)
    ll = np.empty(x.shape[0])
    _loglik_and_grad(f.code, f.scale, f.beta_or_zero, model.y, np.ascontiguousarray(x), ll, grad)
    return ll, grad


def _log_target_rows(model: LgpModel, x: np.ndarray, theta: np.ndarray):
    """log pi(x | y, theta) up to a constant and its gradient, row-wise."""
    ll, g = _loglik_rows(model, x)
    d = x - theta[:, None]
    sd = model.solve(d.T).T
    return ll - 0.5 * np.einsum("ij,ij->i", d, sd), g - sd


def log_target(model: LgpModel, x, theta: float) -> float:
    """log pi(x | y, theta) up to an additive constant."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return float(_log_target_rows(model, x, np.array([float(theta)]))[0][0])


def grad_log_target(model: LgpModel, x, theta: float) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = _log_target_rows(model, x, np.array([float(theta)]))[1][0]
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(f"non-finite gradient at x={x[0]!r}")
    return g


@dataclass(frozen=True)
class MalaConfig:
    """Langevin settings: ``step_size`` is the initial epsilon.

    During a chain's burn-in epsilon is adapted on the log scale toward
    ``target_accept`` and then frozen.
    """

    step_size: float = 0.15
    n_inner: int = 5
    target_accept: float = 0.57

    def __post_init__(self) -> None:
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.n_inner < 1:
            raise ValueError("n_inner must be at least 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")

    def to_json(self) -> dict[str, Any]:
        return {"step_size": self.step_size, "n_inner": self.n_inner, "target_accept": self.target_accept}


def _mala_moves(model: LgpModel, x: np.ndarray, theta: np.ndarray, eps: float, n_inner: int,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``n_inner`` MALA moves on every row of ``x``; returns (x, accepts per row)."""
    x = x.copy()
    lp, g = _log_target_rows(model, x, theta)
    acc = np.zeros(x.shape[0])
    h = 0.5 * eps * eps
    for _ in range(n_inner):
        if not np.all(np.isfinite(g)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(g), axis=1))[0])
            raise FloatingPointError(f"non-finite gradient at x={x[bad]!r}")
        prop = x + h * g + eps * rng.standard_normal(x.shape)
        lp_new, g_new = _log_target_rows(model, prop, theta)
        fwd = prop - x - h * g
        bwd = x - prop - h * g_new
        log_a = lp_new - lp - (np.einsum("ij,ij->i", bwd, bwd) - np.einsum("ij,ij->i", fwd, fwd)) / (2 * eps * eps)
        take = np.log(rng.random(x.shape[0])) < log_a
        x[take] = prop[take]
        lp[take] = lp_new[take]
        g[take] = g_new[take]
        acc += take
    return x, acc


def mala_block_update(model: LgpModel, x, theta, cfg: MalaConfig, rng: np.random.Generator):
    """``cfg.n_inner`` MALA moves targeting pi(x | y, theta).

    ``x`` may be a single state (p,) or a batch (n, p) with ``theta`` a
    scalar or length-n vector.  Returns (new x, acceptance rate).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != model.p:
        raise ValueError(f"x has {xb.shape[1]} coordinates, model needs {model.p}")
    th = np.broadcast_to(np.asarray(theta, dtype=float), (xb.shape[0],)).copy()
    out, acc = _mala_moves(model, xb, th, cfg.step_size, cfg.n_inner, rng)
    rate = float(acc.sum() / (cfg.n_inner * xb.shape[0]))
    return (out[0] if single else out), rate


def _initial_x(model: LgpModel, theta0: float, rng: np.random.Generator, n: int = 1) -> np.ndarray:
    """Draw from the prior conditional X | theta0 (the data are ignored)."""
    return theta0 + model.sqrt_mul(rng.standard_normal((model.p, n))).T


def _theta_noncentred(model: LgpModel, xt: np.ndarray, theta: float, rng: np.random.Generator,
                      slice_cfg: SliceConfig, work) -> float:
    kinds, scales, betas, coefs, anchors = work
    anchors[:] = model.y - xt
    t, st, _ = sample_anchored(kinds, scales, betas, coefs, anchors, model.p, float(theta),
                               slice_cfg.initial_width or model.f1.scale, slice_cfg.max_stepout,
                               slice_cfg.max_shrink, slice_cfg.n_sweeps, rng)
    if st != OK:
        raise SliceError("slice shrinkage exhausted drawing Theta | y, X~", theta, xt)
    return float(t)


def _slice_work(model: LgpModel):
    p = model.p
    return (np.full(p, model.f1.code, dtype=np.int64), np.full(p, model.f1.scale),
            np.full(p, model.f1.beta_or_zero), np.ones(p), np.zeros(p))


def run_lgp_chain(model: LgpModel, parametrisation: str, theta0: float, cfg: MalaConfig, n_iter: int, seed: int,
                  burn_in: int = 0, record_x: bool = False, slice_cfg: SliceConfig = DEFAULT_SLICE,
                  chain_index: int | None = None) -> Trace:
    """Gibbs chain alternating MALA blocks on X with a Theta update.

    ``parametrisation`` is ``centred`` (Theta | X exact Gaussian) or
    ``noncentred`` (MALA on X~ = X - 1 Theta, then Theta by slice sampling
    of prod_i f1(y_i - x~_i - Theta)).  X starts from a prior draw given
    theta0.  Epsilon is adapted during the first ``burn_in`` iterations.
    """
    from .model import Parametrisation

    par = Parametrisation.from_json(parametrisation).variant if isinstance(parametrisation, str) else parametrisation.variant
    if par not in ("centred", "noncentred"):
        raise ValueError("the latent GP supports only centred and non-centred samplers")
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    rng = make_rng(seed, chain_index)
    theta = float(theta0)
    x = _initial_x(model, theta, rng)
    log_eps = math.log(cfg.step_size)
    work = _slice_work(model) if par == "noncentred" else None
    thetas = np.empty(n_iter)
    xs = np.empty((n_iter, model.p)) if record_x else None
    acc_total = 0.0
    acc_post = 0.0
    for it in range(n_iter):
        eps = math.exp(log_eps)
        x, acc = _mala_moves(model, x, np.array([theta]), eps, cfg.n_inner, rng)
        rate = float(acc[0]) / cfg.n_inner
        acc_total += rate
        if it < burn_in:
            log_eps += (rate - cfg.target_accept) / (it + 1) ** 0.6
        else:
            acc_post += rate
        if par == "centred":
            theta = float(theta_given_x(model, x[0], rng))
        else:
            xt = x[0] - theta
            theta = _theta_noncentred(model, xt, theta, rng, slice_cfg, work)
            x = (xt + theta)[None, :]
        thetas[it] = theta
        if record_x:
            xs[it] = x[0]
    meta = {
        "model": model.to_json() if model.p <= 1000 else {"p": model.p},
        "mala": cfg.to_json(),
        "final_step_size": math.exp(log_eps),
        "accept_rate": acc_total / n_iter,
        "accept_rate_after_burn_in": acc_post / (n_iter - burn_in) if n_iter > burn_in else None,
    }
    return Trace(thetas, xs, seed, f"lgp-{par}", n_iter, burn_in, float(theta0), meta)


def tune_step_size(model: LgpModel, theta: float, cfg: MalaConfig, rng: np.random.Generator,
                   n_adapt: int = 300) -> float:
    """Adapt epsilon at fixed theta toward ``cfg.target_accept``; returns it."""
    x = _initial_x(model, theta, rng)
    log_eps = math.log(cfg.step_size)
    th = np.array([float(theta)])
    for it in range(n_adapt):
        x, acc = _mala_moves(model, x, th, math.exp(log_eps), 1, rng)
        log_eps += (float(acc[0]) - cfg.target_accept) / (it + 1) ** 0.6
    return math.exp(log_eps)


def one_step_increments(model: LgpModel, theta0: float, n_rep: int, cfg: MalaConfig, rng: np.random.Generator,
                        n_burn: int = 10) -> np.ndarray:
    """Theta_1 - theta0 for the centred sampler, X refreshed every replicate.

    Each replicate starts X from the prior draw given theta0, runs
    ``n_burn`` MALA blocks at fixed theta0 and then draws Theta | X.
    """
    x = _initial_x(model, float(theta0), rng, int(n_rep))
    th = np.full(int(n_rep), float(theta0))
    for _ in range(n_burn):
        x, _ = _mala_moves(model, x, th, cfg.step_size, cfg.n_inner, rng)
    return theta_given_x(model, x, rng) - theta0


def first_entry_time(model: LgpModel, parametrisation: str, theta0: float, radius: float, max_iter: int,
                     cfg: MalaConfig, seed: int) -> int | None:
    """Iterations until |Theta_n| <= radius (``None`` when censored)."""
    tr = run_lgp_chain(model, parametrisation, theta0, cfg, max_iter, seed)
    hit = np.flatnonzero(np.abs(tr.thetas) <= radius)
    return int(hit[0]) + 1 if hit.size else None


@jit
def _coord_sweeps(prec, y, theta, kind, scale, beta, x, n_sweeps, width, max_stepout, max_shrink, rng,
                  wk, ws, wb, wc, wa):
    p = x.size
    for _ in range(n_sweeps):
        for i in range(p):
            acc = 0.0
            for j in range(p):
                if j != i:
                    acc += prec[i, j] * (x[j] - theta)
            v = 1.0 / prec[i, i]
            mu = theta - v * acc
            wk[0] = kind
            ws[0] = scale
            wb[0] = beta
            wc[0] = 1.0
            wa[0] = y[i]
            wk[1] = _dens.GAUSS
            ws[1] = math.sqrt(v)
            wb[1] = 0.0
            wc[1] = 1.0
            wa[1] = mu
            t, st, a = sample_anchored(wk, ws, wb, wc, wa, 2, x[i], width, max_stepout, max_shrink, 1, rng)
            if st != OK:
                return st
            x[i] = t
    return OK


def coordinate_sampler(model: LgpModel, theta: float, n_iter: int, rng: np.random.Generator, thin: int = 1,
                       x0=None, slice_cfg: SliceConfig = DEFAULT_SLICE) -> np.ndarray:
    """Reference sampler for pi(x | y, theta): one slice update per coordinate.

    Each coordinate's full conditional is f1(y_i - x_i) times a Gaussian
    from the precision matrix.  Returns ``n_iter // thin`` recorded sweeps.
    """
    prec = model.solve(np.eye(model.p))
    prec = 0.5 * (prec + prec.T)
    x = _initial_x(model, theta, rng)[0] if x0 is None else np.array(x0, dtype=float)
    f = model.f1
    work = (np.zeros(2, dtype=np.int64), np.ones(2), np.zeros(2), np.ones(2), np.zeros(2))
    width = slice_cfg.initial_width or max(f.scale, 1.0)
    out = np.empty((n_iter // thin, model.p))
    for k in range(n_iter // thin):
        st = _coord_sweeps(prec, model.y, float(theta), f.code, f.scale, f.beta_or_zero, x, int(thin), width,
                           slice_cfg.max_stepout, slice_cfg.max_shrink, rng, *work)
        if st != OK:
            raise SliceError("coordinate sampler shrinkage exhausted", theta, x)
        out[k] = x
    return out
