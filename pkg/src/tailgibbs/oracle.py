"""Deterministic quadrature ground truth for the two-line model (m = m_1 = 1).

The conditional density of X given (y, theta) is

    pi(x | y, theta) = f_theta(x) / c_theta,  f_theta(x) = f1(y - x) f2(x - theta),

and under the flat prior the marginal posterior of Theta is proportional to
c_theta.  Integrals are split at the data, at theta, at the conditional mode
and at a ladder of widths around each, then handed to QUADPACK's adaptive
Gauss-Kronrod rule.  The two unbounded tails use x = b + s tan(u), which
keeps 1/x^2 tails bounded on a finite interval.  Everything is computed
relative to the peak value so that far-tail conditionals (where f_theta is
far below the double range) stay representable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ErrorDist
from .model import HierModel


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200
    tail_cutoff_policy: str = "tan"

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.tail_cutoff_policy != "tan":
            raise ValueError("only the 'tan' tail substitution is implemented")


DEFAULT_QUAD = QuadConfig()


def _quad(func, a, b, cfg: QuadConfig) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(func, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
                             full_output=1)
    val, err = res[0], res[1]
    if len(res) == 4 and res[2].get("last", 0) >= cfg.max_subdivisions:
        if err > 1e-6 * max(abs(val), cfg.abs_tol):
            raise QuadratureError(f"quadrature did not converge on [{a:g}, {b:g}]", err)
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite integral on [{a:g}, {b:g}]", float("inf"))
    return val, err


def _integrate_line(logf: Callable[[float], float], breaks: Sequence[float], tail_scale: float,
                    cfg: QuadConfig, weight: Callable[[float], float] | None = None):
    """Integrate exp(logf) (times ``weight``) over R split at ``breaks``.

    Returns ``(pieces, errors, edges)``: pieces[0] is the left tail, pieces[-1]
    the right tail and pieces[i] for 0 < i < len-1 covers
    [edges[i-1], edges[i]].
    """
    edges = np.unique(np.asarray(breaks, dtype=float))
    if weight is None:
        def g(x):
            return math.exp(logf(x))
    else:
        def g(x):
            return weight(x) * math.exp(logf(x))

    lo, hi = edges[0], edges[-1]
    s = tail_scale

    def left(u):
        c = math.cos(u)
        return g(lo - s * math.tan(u)) * s / (c * c)

    def right(u):
        c = math.cos(u)
        return g(hi + s * math.tan(u)) * s / (c * c)

    half_pi = 0.5 * math.pi
    pieces = []
    errs = []
    v, e = _quad(left, 0.0, half_pi, cfg)
    pieces.append(v)
    errs.append(e)
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _quad(g, a, b, cfg)
        pieces.append(v)
        errs.append(e)
    v, e = _quad(right, 0.0, half_pi, cfg)
    pieces.append(v)
    errs.append(e)
    return np.array(pieces), np.array(errs), edges


class _Conditional:
    """pi(x | y, theta) for a two-line model, with cached breakpoints."""

    def __init__(self, model: HierModel, theta: float):
        if model.m != 1 or model.y[0].size != 1:
            raise ValueError("the quadrature oracle handles m = m_1 = 1 only")
        self.model = model
        self.theta = float(theta)
        self.y = model.y0
        f1, f2 = model.f1, model.f2
        y, th = self.y, self.theta

        def raw(x):
            return f1.log_density(y - x) + f2.log_density(x - th)

        self._raw = raw
        cands = [y, th, 0.5 * (y + th)]
        lo, hi = min(y, th), max(y, th)
        if hi > lo:
            res = optimize.minimize_scalar(lambda x: -raw(x), bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-10 * (1.0 + abs(lo) + abs(hi))})
            cands.append(float(res.x))
        vals = [raw(c) for c in cands]
        i = int(np.argmax(vals))
        self.mode = cands[i]
        self.shift = vals[i]
        self.width = self._local_width()
        smin = min(f1.scale, f2.scale)
        self.tail_scale = max(f1.scale, f2.scale)
        bps = [y, th, self.mode]
        for c in (1.0, 5.0, 25.0):
            bps += [y - c * f1.scale, y + c * f1.scale, th - c * f2.scale, th + c * f2.scale]
        for c in (1.0, 4.0, 16.0, 64.0):
            bps += [self.mode - c * self.width, self.mode + c * self.width]
        if hi - lo > smin:
            bps += list(np.linspace(lo, hi, 9))
        self.breaks = bps

    def _local_width(self) -> float:
        m = self.mode
        h = 1e-4 * max(1.0, abs(m)) * min(self.model.f1.scale, self.model.f2.scale)
        d2 = (self._raw(m + h) - 2.0 * self._raw(m) + self._raw(m - h)) / (h * h)
        smin = min(self.model.f1.scale, self.model.f2.scale)
        if math.isfinite(d2) and d2 < 0:
            return min(smin, 1.0 / math.sqrt(-d2))
        return smin

    def logf(self, x: float) -> float:
        return self._raw(x) - self.shift

    def pieces(self, extra: Sequence[float] = (), cfg: QuadConfig = DEFAULT_QUAD, weight=None):
        return _integrate_line(self.logf, list(self.breaks) + list(extra), self.tail_scale, cfg, weight)

    def log_norm(self, cfg: QuadConfig = DEFAULT_QUAD) -> tuple[float, float]:
        p, e, _ = self.pieces(cfg=cfg)
        tot = p.sum()
        return self.shift + math.log(tot), e.sum() / tot

    def cdf(self, points, cfg: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        p, _, edges = self.pieces(extra=pts.ravel(), cfg=cfg)
        cum = np.concatenate([[p[0]], p[0] + np.cumsum(p[1:-1])])
        total = p.sum()
        idx = np.searchsorted(edges, pts)
        return cum[idx] / total


def _frame_centre(frame, theta: float) -> float:
    if frame in ("centred", "P0", "centered"):
        return 0.0
    if frame in ("noncentred", "P1", "noncentered"):
        return float(theta)
    rho = float(frame)
    if not 0.0 <= rho <= 1.0:
        raise ValueError("partial-centring frame needs rho in [0, 1]")
    return rho * float(theta)


def log_normalizing_constant(model: HierModel, theta: float, cfg: QuadConfig = DEFAULT_QUAD,
                             full_output: bool = False):
    val, rel_err = _Conditional(model, theta).log_norm(cfg)
    return (val, rel_err) if full_output else val


def normalizing_constant(model: HierModel, theta: float, cfg: QuadConfig = DEFAULT_QUAD,
                         full_output: bool = False):
    """c_theta = integral of f1(y - x) f2(x - theta) dx."""
    lv, rel = log_normalizing_constant(model, theta, cfg, full_output=True)
    val = math.exp(lv)
    return (val, rel * val) if full_output else val


def conditional_mean(model: HierModel, theta: float, cfg: QuadConfig = DEFAULT_QUAD, full_output: bool = False):
    """E{X | y, theta}."""
    cond = _Conditional(model, theta)
    c = cond.mode
    p, e, _ = cond.pieces(cfg=cfg)
    q, qe, _ = cond.pieces(cfg=cfg, weight=lambda x: x - c)
    tot = p.sum()
    val = c + q.sum() / tot
    err = qe.sum() / tot + abs(q.sum()) * e.sum() / tot**2
    return (val, err) if full_output else val


def conditional_tail_prob(model: HierModel, theta: float, k: float, frame="centred",
                          cfg: QuadConfig = DEFAULT_QUAD, full_output: bool = False):
    """P(|U| > k | y, theta) with U = X (centred), X - theta (non-centred)
    or X - rho theta (``frame`` given as rho)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return (1.0, 0.0) if full_output else 1.0
    c = _frame_centre(frame, theta)
    cond = _Conditional(model, theta)
    p, e, edges = cond.pieces(extra=[c - k, c + k], cfg=cfg)
    inner = np.zeros(p.size, dtype=bool)
    lo_i = int(np.searchsorted(edges, c - k))
    hi_i = int(np.searchsorted(edges, c + k))
    inner[lo_i + 1:hi_i + 1] = True
    tot = p.sum()
    val = min(1.0, max(0.0, float(p[~inner].sum() / tot)))
    err = e.sum() / tot
    return (val, err) if full_output else val


def conditional_cdf(model: HierModel, theta: float, points, frame="centred", cfg: QuadConfig = DEFAULT_QUAD):
    """P(U <= u | y, theta) at each ``u`` in ``points`` (frame as above)."""
    c = _frame_centre(frame, theta)
    pts = np.asarray(points, dtype=float)
    return _Conditional(model, theta).cdf(pts + c, cfg)


def _marginal_logc(model: HierModel, cfg: QuadConfig):
    cache: dict[float, float] = {}

    def logc(theta: float) -> float:
        if theta not in cache:
            cache[theta] = _Conditional(model, theta).log_norm(cfg)[0]
        return cache[theta]

    return logc


def marginal_tail_prob(model: HierModel, a: float, cfg: QuadConfig = DEFAULT_QUAD, full_output: bool = False):
    """P(|Theta - 0| > a | y) under the flat prior, by nested quadrature."""
    if a < 0:
        raise ValueError("a must be non-negative")
    if a == 0:
        return (1.0, 0.0) if full_output else 1.0
    inner = QuadConfig(rel_tol=min(cfg.rel_tol, 1e-11), abs_tol=cfg.abs_tol, max_subdivisions=cfg.max_subdivisions)
    outer = QuadConfig(rel_tol=max(cfg.rel_tol, 1e-9), abs_tol=1e-13, max_subdivisions=cfg.max_subdivisions)
    logc = _marginal_logc(model, inner)
    y = model.y0
    s = math.hypot(model.f1.scale, model.f2.scale)
    ref = logc(y)

    def logg(t):
        return logc(t) - ref

    breaks = [y, -a, a]
    for c in (1.0, 3.0, 10.0, 30.0):
        breaks += [y - c * s, y + c * s]
    p, e, edges = _integrate_line(logg, breaks, s, outer)
    inside = np.zeros(p.size, dtype=bool)
    lo_i = int(np.searchsorted(edges, -a))
    hi_i = int(np.searchsorted(edges, a))
    inside[lo_i + 1:hi_i + 1] = True
    tot = p.sum()
    if not math.isfinite(tot) or tot <= 0:
        raise QuadratureError("marginal posterior is not integrable", float("inf"))
    val = min(1.0, max(0.0, float(p[~inside].sum() / tot)))
    err = e.sum() / tot
    return (val, err) if full_output else val


def marginal_cdf(model: HierModel, points, cfg: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """Posterior CDF of Theta at ``points`` (flat prior, nested quadrature)."""
    inner = QuadConfig(rel_tol=min(cfg.rel_tol, 1e-11), abs_tol=cfg.abs_tol, max_subdivisions=cfg.max_subdivisions)
    outer = QuadConfig(rel_tol=max(cfg.rel_tol, 1e-9), abs_tol=1e-13, max_subdivisions=cfg.max_subdivisions)
    logc = _marginal_logc(model, inner)
    y = model.y0
    s = math.hypot(model.f1.scale, model.f2.scale)
    ref = logc(y)
    pts = np.asarray(points, dtype=float)
    breaks = [y] + [y + c * s for c in (-30.0, -10.0, -3.0, -1.0, 1.0, 3.0, 10.0, 30.0)] + list(pts.ravel())
    p, _, edges = _integrate_line(lambda t: logc(t) - ref, breaks, s, outer)
    cum = np.concatenate([[p[0]], p[0] + np.cumsum(p[1:-1])])
    return cum[np.searchsorted(edges, pts)] / p.sum()


def gaussian_rate(sigma1: float, sigma2: float, rho: float) -> float:
    """Convergence rate of the (partially) centred Gibbs sampler on the
    Gaussian model, which equals corr(U, Theta | Y)^2 for U = X - rho Theta."""
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError("scales must be positive")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    kappa = sigma2**2 / (sigma2**2 + sigma1**2)
    return (rho - (1.0 - kappa)) ** 2 / (rho**2 * kappa + (1.0 - rho) ** 2 * (1.0 - kappa))


def _reference_cdf(reference):
    """Normalise a reference law into ``(cdf, ppf_or_None)``."""
    if isinstance(reference, ErrorDist):
        return reference.cdf, reference.ppf
    if isinstance(reference, tuple) and len(reference) == 2 and isinstance(reference[0], ErrorDist):
        dist, loc = reference
        return (lambda x: dist.cdf(np.asarray(x) - loc)), (lambda q: dist.ppf(q) + loc)
    if hasattr(reference, "cdf"):
        return reference.cdf, getattr(reference, "ppf", None)
    if callable(reference):
        return reference, None
    raise TypeError(f"cannot interpret {reference!r} as a reference distribution")


def cdf_distance(model: HierModel, theta: float, frame, reference, grid=None, n_grid: int = 512,
                 cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """sup over a grid of |P(U <= u | y, theta) - F_ref(u)|.

    ``reference`` is an :class:`ErrorDist` (centred at 0), a pair
    ``(ErrorDist, location)``, a frozen scipy law, a CDF callable, or the
    string ``"self"`` (the conditional itself, so the distance is 0).
    The default grid is the reference's ``n_grid`` mid-quantiles.
    """
    self_ref = isinstance(reference, str) and reference == "self"
    ref_cdf, ref_ppf = (None, None) if self_ref else _reference_cdf(reference)
    if grid is None:
        qs = (np.arange(n_grid) + 0.5) / n_grid
        if ref_ppf is not None:
            grid = np.asarray(ref_ppf(qs), dtype=float)
        else:
            cond = _Conditional(model, theta)
            c = _frame_centre(frame, theta)
            grid = cond.mode - c + cond.width * np.linspace(-20.0, 20.0, n_grid)
    grid = np.asarray(grid, dtype=float)
    f_quad = conditional_cdf(model, theta, grid, frame, cfg)
    if self_ref:
        return float(np.max(np.abs(f_quad - conditional_cdf(model, theta, grid, frame, cfg))))
    return float(np.max(np.abs(f_quad - np.asarray(ref_cdf(grid), dtype=float))))


def mean_abs_moment(dist: ErrorDist, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """E|Z| by quadrature of the normalised density."""
    p, _, _ = _integrate_line(lambda x: float(dist.log_density(x)), [0.0, dist.scale, 5.0 * dist.scale],
                              dist.scale, cfg, weight=abs)
    return float(p.sum())


def dist_cdf(dist: ErrorDist, points, cfg: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """CDF of an error law by quadrature of its normalised density."""
    pts = np.asarray(points, dtype=float)
    p, _, edges = _integrate_line(lambda x: float(dist.log_density(x)), [0.0] + list(pts.ravel()), dist.scale, cfg)
    cum = np.concatenate([[p[0]], p[0] + np.cumsum(p[1:-1])])
    return cum[np.searchsorted(edges, pts)]
