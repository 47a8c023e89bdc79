"""Empirical stability diagnostics for the Gibbs samplers.

The classifier combines three kinds of evidence gathered on a ladder of
starting points theta0:

* drift ratio  E[exp(alpha |Theta_1|) | theta0] / exp(alpha |theta0|),
* rung-to-rung stationarity of the one-step increments Theta_1 - theta0,
* first-return times into [-k, k],

plus the quadrature oracle's tail probability of the updated block, which
is a sufficient condition for uniform ergodicity.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import oracle
from .conditionals import DEFAULT_SLICE, SliceConfig
from .errors import ErrorDist
from .kernels import first_entry_time, make_rng, one_step
from .model import HierModel, Parametrisation, Stability, theoretical_stability


@dataclass(frozen=True)
class DiagConfig:
    """Constants of the classifier; all of them are written into reports.

    ``return_envelope`` is the median return time (from the largest rung)
    allowed for a uniform verdict; ``return_max_iter`` censors each run.
    ``ptip_eps`` is the margin in ``P(|U| > k) <= 1 - ptip_eps``.
    """

    alpha: float = 0.05
    theta_ladder: tuple[float, ...] = (1e2, 1e3, 1e4)
    n_rep: int = 10_000
    mode_radius: float = 10.0
    ks_threshold: float = 0.05
    drift_threshold: float = 0.95
    ptip_eps: float = 0.05
    return_envelope: float = 25.0
    return_max_iter: int = 500
    return_seeds: int = 20

    def __post_init__(self) -> None:
        lad = tuple(float(t) for t in self.theta_ladder)
        object.__setattr__(self, "theta_ladder", lad)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if len(lad) < 2 or any(b <= a for a, b in zip(lad, lad[1:])) or lad[0] <= 0:
            raise ValueError("theta_ladder needs at least two strictly increasing positive rungs")
        if self.n_rep < 1000:
            raise ValueError("n_rep must be at least 1000")
        if not self.mode_radius > 0:
            raise ValueError("mode_radius must be positive")
        if not 0 < self.ks_threshold < 1 or not 0 < self.drift_threshold < 1 or not 0 < self.ptip_eps < 1:
            raise ValueError("ks_threshold, drift_threshold and ptip_eps must lie in (0, 1)")
        if self.return_max_iter < 1 or self.return_seeds < 1 or not self.return_envelope > 0:
            raise ValueError("return-time settings must be positive")

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["theta_ladder"] = list(self.theta_ladder)
        return d

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> DiagConfig:
        extra = set(obj) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown keys in diag config: {sorted(extra)}")
        obj = dict(obj)
        if "theta_ladder" in obj:
            obj["theta_ladder"] = tuple(obj["theta_ladder"])
        return cls(**obj)


DEFAULT_DIAG = DiagConfig()


def _rung_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def _monitored(kernel: Parametrisation, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """The chain the diagnostics watch: X for the grouped kernel, Theta otherwise."""
    return xs[:, 0] if kernel.variant == "grouped" else theta


def one_step_draws(kernel: Parametrisation, model: HierModel, theta0: float, n_rep: int,
                   rng: np.random.Generator, cfg: SliceConfig = DEFAULT_SLICE) -> np.ndarray:
    """Monitored value after one transition from theta0 (x0 = theta0 for the grouped kernel)."""
    th, xs = one_step(kernel, model, theta0, n_rep, rng, cfg)
    return _monitored(kernel, th, xs)


def drift_from_draws(draws: np.ndarray, theta0: float, alpha: float) -> tuple[float, float]:
    """Ratio estimate and delta-method standard error, computed in log space."""
    a = alpha * (np.abs(draws) - abs(theta0))
    n = a.size
    top = float(np.max(a))
    w = np.exp(a - top)
    log_ratio = float(logsumexp(a) - math.log(n))
    sd = float(np.std(w, ddof=1)) if n > 1 else 0.0
    log_se = top + math.log(sd) - 0.5 * math.log(n) if sd > 0 else -math.inf
    if n == 1:
        log_se = math.inf
    return _exp_sat(log_ratio), _exp_sat(log_se)


def _exp_sat(v: float) -> float:
    """exp that saturates to inf instead of raising."""
    return math.inf if v > 700.0 else math.exp(v)


def drift_ratio(kernel: Parametrisation, model: HierModel, theta0: float, alpha: float, n_rep: int, seed: int,
                cfg: SliceConfig = DEFAULT_SLICE) -> tuple[float, float]:
    """MC estimate of E[e^{alpha|Theta_1|} | theta0] / e^{alpha|theta0|} and its stderr."""
    if n_rep < 1000:
        raise ValueError("n_rep must be at least 1000")
    if alpha == 0:
        return 1.0, 0.0
    draws = one_step_draws(kernel, model, theta0, n_rep, make_rng(seed), cfg)
    return drift_from_draws(draws, theta0, alpha)


def _limit_cdf(limit) -> Callable | None:
    if limit is None:
        return None
    if isinstance(limit, ErrorDist):
        return limit.cdf
    if hasattr(limit, "cdf"):
        return limit.cdf
    return limit


def increments_ks(increments: Sequence[np.ndarray], limit=None) -> list[tuple[float | None, float | None]]:
    """For each rung: (two-sample KS against the previous rung, KS against ``limit``)."""
    cdf = _limit_cdf(limit)
    out = []
    for i, inc in enumerate(increments):
        prev = float(stats.ks_2samp(increments[i - 1], inc).statistic) if i > 0 else None
        lim = float(stats.kstest(inc, cdf).statistic) if cdf is not None else None
        out.append((prev, lim))
    return out


def increment_stationarity(kernel: Parametrisation, model: HierModel, theta_ladder: Sequence[float], n_rep: int,
                           seed: int, limit=None, cfg: SliceConfig = DEFAULT_SLICE) -> list[dict[str, Any]]:
    """KS statistics of one-step increments along the ladder.

    Returns one record per rung with ``ks_prev`` (two-sample KS against the
    previous rung) and ``ks_limit`` (one-sample KS against ``limit``).
    """
    if len(theta_ladder) < 2:
        raise ValueError("the ladder needs at least two rungs")
    incs = [one_step_draws(kernel, model, t, n_rep, _rung_rng(seed, i), cfg) - t for i, t in enumerate(theta_ladder)]
    return [{"theta0": float(t), "ks_prev": a, "ks_limit": b}
            for t, (a, b) in zip(theta_ladder, increments_ks(incs, limit))]


def return_time(kernel: Parametrisation, model: HierModel, theta0: float, mode_radius: float, max_iter: int,
                seeds: Sequence[int], cfg: SliceConfig = DEFAULT_SLICE) -> dict[str, Any]:
    """First-entry times into [-k, k] over seeds, censored at ``max_iter``.

    Censored runs count as ``max_iter`` in the quantiles, which are therefore
    lower bounds whenever ``n_censored > 0``.
    """
    times = []
    for s in seeds:
        n = first_entry_time(kernel, model, theta0, mode_radius, max_iter, make_rng(int(s)), cfg)
        times.append(max_iter if n is None else n)
    t = np.asarray(times, dtype=float)
    n_cens = sum(1 for s in times if s >= max_iter and abs(theta0) > mode_radius)
    q25, q50, q75 = (float(v) for v in np.quantile(t, [0.25, 0.5, 0.75]))
    return {"theta0": float(theta0), "median": q50, "q25": q25, "q75": q75, "n_censored": int(n_cens),
            "n_seeds": len(times), "max_iter": int(max_iter), "times": [int(v) for v in times],
            "all_censored": n_cens == len(times)}


# ----------------------------------------------------------------- classifier

@dataclass
class StabilityReport:
    model_id: str
    kernel_id: str
    drift_curve: list[tuple[float, float, float]]
    increment_tests: list[tuple[float, float | None, float | None]]
    return_times: list[dict[str, Any]]
    classification: Stability
    evidence: str
    ptip: list[tuple[float, float]] = field(default_factory=list)
    expected: str | None = None
    config: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["classification"] = self.classification.value
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _ptip_frame(kernel: Parametrisation):
    if kernel.variant == "centred":
        return ["centred"]
    if kernel.variant == "noncentred":
        return ["noncentred"]
    if kernel.variant == "partial":
        return [float(kernel.rho)]
    if kernel.variant == "hybrid":
        return ["centred", "noncentred"]
    return []


def ptip_check(kernel: Parametrisation, model: HierModel, cfg: DiagConfig) -> tuple[bool, list[tuple[float, float]]]:
    """Oracle tail probability of the updated block on the ladder.

    Passes when ``P(|U| > k | y, theta) <= 1 - ptip_eps`` on every rung, for
    at least one of the frames the kernel uses (a hybrid kernel inherits the
    better of its two components).  The grouped kernel has no oracle frame.
    """
    best_ok, best_probs = False, []
    for frame in _ptip_frame(kernel):
        probs = [(t, float(oracle.conditional_tail_prob(model, t, cfg.mode_radius, frame)))
                 for t in cfg.theta_ladder]
        ok = all(p <= 1.0 - cfg.ptip_eps for _, p in probs)
        if ok or not best_probs:
            best_probs = probs
        if ok:
            best_ok = True
            break
    return best_ok, best_probs


def classify(kernel: Parametrisation, model: HierModel, cfg: DiagConfig = DEFAULT_DIAG, seed: int = 0,
             slice_cfg: SliceConfig = DEFAULT_SLICE, limit=None) -> StabilityReport:
    """Empirical U / G / N verdict for one (model, kernel) pair.

    Rules, in order:

    1. N when increments at the two largest rungs agree (KS <= ks_threshold)
       and the drift ratio at the largest rung is >= 1 - 2 stderr.
    2. U when the oracle tail probability passes and the median return time
       from the largest rung is within ``return_envelope``.
    3. G otherwise; evidence flags a drift ratio above ``drift_threshold``.
    """
    lad = cfg.theta_ladder
    incs, drift = [], []
    for i, t in enumerate(lad):
        d = one_step_draws(kernel, model, t, cfg.n_rep, _rung_rng(seed, i), slice_cfg)
        r, se = drift_from_draws(d, t, cfg.alpha)
        drift.append((float(t), r, se))
        incs.append(d - t)
    ks = increments_ks(incs, limit)
    inc_tests = [(float(t), a, b) for t, (a, b) in zip(lad, ks)]
    ks_top = ks[-1][0]
    r_top, se_top = drift[-1][1], drift[-1][2]
    rw_like = ks_top is not None and ks_top <= cfg.ks_threshold
    no_drift = r_top >= 1.0 - 2.0 * se_top
    notes = [f"KS(rung {lad[-2]:g} vs {lad[-1]:g}) = {ks_top:.4f}",
             f"drift ratio at {lad[-1]:g} = {r_top:.4f} +/- {se_top:.4f}"]
    ptip_ok, ptip = False, []
    returns: list[dict[str, Any]] = []
    if rw_like and no_drift:
        verdict = Stability.NONGEOMETRIC
        notes.append("rule N: increments are random-walk-like and the drift does not contract")
    else:
        ptip_ok, ptip = ptip_check(kernel, model, cfg)
        if ptip:
            notes.append("oracle tail prob " + ", ".join(f"{p:.3g}@{t:g}" for t, p in ptip))
        if ptip_ok:
            seeds = [seed * 1000 + j for j in range(cfg.return_seeds)]
            rt = return_time(kernel, model, lad[-1], cfg.mode_radius, cfg.return_max_iter, seeds, slice_cfg)
            returns.append(rt)
            notes.append(f"median return from {lad[-1]:g} = {rt['median']:g}")
        if ptip_ok and returns and returns[-1]["median"] <= cfg.return_envelope:
            verdict = Stability.UNIFORM
            notes.append("rule U: tail probability bounded away from 1 and fast returns")
        else:
            verdict = Stability.GEOMETRIC
            notes.append("rule G: neither random-walk nor uniform evidence")
            worst = max(r for _, r, _ in drift)
            if worst > cfg.drift_threshold:
                notes.append(f"ambiguous: drift ratio {worst:.4f} exceeds {cfg.drift_threshold}")
            if rw_like:
                notes.append("increments are rung-stationary but contract on average (constant drift)")
    try:
        expected = theoretical_stability(model, kernel).value
    except ValueError:
        expected = None
    return StabilityReport(model.model_id, kernel.kernel_id, drift, inc_tests, returns, verdict, "; ".join(notes),
                           ptip, expected, cfg.to_json(), seed)


# ------------------------------------------------------------ property suite

@dataclass
class PropertyReport:
    model_id: str
    RIP: bool
    RID: bool
    DUR: bool
    PUR: bool
    PTIP_P0: bool
    PTIP_P1: bool
    rip_distances: list[float]
    rid_distances: list[float]
    mean_offsets: list[float]
    dur_d: float
    pur_d: float
    weight: float
    ladder: list[float]

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def property_check(model: HierModel, cfg: DiagConfig = DEFAULT_DIAG, tol: float = 0.01,
                   d_min: float = 0.05) -> PropertyReport:
    """Oracle verdicts for the robustness properties on the theta ladder.

    RIP: CDF distance of X | theta to the law of Z1 + y falls below ``tol``
    at the largest rung and does not grow along the ladder.  RID: same for
    X - theta against the law of Z2.  DUR: |E[X | theta]| <= |theta| - d
    with fitted d >= ``d_min``.  PUR: sgn(theta)(E[X | theta] - y) >= d with
    d >= ``d_min``.  PTIP: tail probability <= 1 - ptip_eps on the ladder.
    ``weight`` is (E[X | theta] - y) / (theta - y) at the largest rung.
    """
    y = model.y0
    lad = [y + t for t in cfg.theta_ladder]
    rip = [oracle.cdf_distance(model, t, "centred", (model.f1, y)) for t in lad]
    rid = [oracle.cdf_distance(model, t, "noncentred", model.f2) for t in lad]
    means = [float(oracle.conditional_mean(model, t)) for t in lad]
    dur_d = min(abs(t) - abs(mu) for t, mu in zip(lad, means))
    pur_d = min(math.copysign(1.0, t) * (mu - y) for t, mu in zip(lad, means))

    def settles(dist: list[float]) -> bool:
        return dist[-1] <= tol and all(b <= a + tol for a, b in zip(dist, dist[1:]))

    p0, _ = ptip_check(Parametrisation.centred(), model, cfg)
    p1, _ = ptip_check(Parametrisation.noncentred(), model, cfg)
    return PropertyReport(model.model_id, settles(rip), settles(rid), dur_d >= d_min, pur_d >= d_min, p0, p1,
                          rip, rid, [mu - t for t, mu in zip(lad, means)], dur_d, pur_d,
                          (means[-1] - y) / (lad[-1] - y), lad)


# ------------------------------------------------------------ tail table

LETTERS = ("C", "E", "G", "L")
EE_RATIOS = (0.5, 2.0)


def table2_cells(par_filter: Sequence[str] = ("P0", "P1")) -> list[tuple[str, str, float | None, str]]:
    """(f1 letter, f2 letter, (E,E) scale ratio or None, 'P0'|'P1') in a fixed order."""
    cells = []
    for par in par_filter:
        for z2 in LETTERS:
            for z1 in LETTERS:
                if z1 == "E" and z2 == "E":
                    for r in EE_RATIOS:
                        cells.append((z1, z2, r, par))
                else:
                    cells.append((z1, z2, None, par))
    return cells


def cell_model(f1: str, f2: str, ratio: float | None = None, beta: float = 3.0) -> HierModel:
    """Default-scale model for a tail-table cell; (E,E) uses scale(f2)/scale(f1) = ratio."""
    d1 = ErrorDist.from_letter(f1, beta=beta)
    d2 = ErrorDist.from_letter(f2, beta=beta)
    if ratio is not None:
        d2 = d2.with_scale(float(ratio))
    return HierModel.simple(d1, d2, 0.0)


def cell_key(f1: str, f2: str, ratio: float | None, par: str) -> str:
    tag = f"{f1}{f2}" if ratio is None else f"{f1}{f2}@{ratio:g}"
    return f"{tag}-{par}"


def _run_cell(args) -> dict[str, Any]:
    f1, f2, ratio, par, cfg_json, seed = args
    cfg = DiagConfig.from_json(cfg_json)
    model = cell_model(f1, f2, ratio)
    kernel = Parametrisation.from_json(par)
    out: dict[str, Any] = {"f1": f1, "f2": f2, "ratio": ratio, "par": par, "key": cell_key(f1, f2, ratio, par)}
    try:
        rep = classify(kernel, model, cfg, seed)
        out.update(classification=rep.classification.value, expected=rep.expected, report=rep.to_json())
    except Exception as exc:  # recorded in-cell; the sweep continues
        out.update(classification="ERROR", expected=theoretical_stability(model, kernel).value,
                   error=f"{type(exc).__name__}: {exc}")
    return out


def max_workers() -> int:
    env = os.environ.get("GSL_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            raise ValueError(f"GSL_THREADS must be an integer, got {env!r}") from None
    return n


def table2_sweep(cfg: DiagConfig = DEFAULT_DIAG, seed: int = 0, cells=None, workers: int | None = None
                 ) -> list[dict[str, Any]]:
    """Classify every tail-table cell; results come back in cell order."""
    cells = table2_cells() if cells is None else list(cells)
    jobs = [(f1, f2, r, par, cfg.to_json(), seed) for f1, f2, r, par in cells]
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(_run_cell, jobs))


def table2_matrix(results: list[dict[str, Any]]) -> str:
    """CSV in matrix layout: one block per sampler, rows Z2, columns Z1.

    The (E,E) entry lists both scale ratios as ``r=0.5:X|r=2:Y``.
    """
    lines = []
    for par in ("P0", "P1"):
        sub = [r for r in results if r["par"] == par]
        if not sub:
            continue
        lines.append(f"{par},Z1=C,Z1=E,Z1=G,Z1=L")
        for z2 in LETTERS:
            row = [f"Z2={z2}"]
            for z1 in LETTERS:
                hits = [r for r in sub if r["f1"] == z1 and r["f2"] == z2]
                if not hits:
                    row.append("")
                elif len(hits) == 1 and hits[0]["ratio"] is None:
                    row.append(hits[0]["classification"])
                else:
                    row.append("|".join(f"r={h['ratio']:g}:{h['classification']}" for h in hits))
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def table2_long(results: list[dict[str, Any]]) -> str:
    lines = ["par,f1,f2,ratio,classification,expected,match"]
    for r in results:
        ratio = "" if r["ratio"] is None else f"{r['ratio']:g}"
        lines.append(f"{r['par']},{r['f1']},{r['f2']},{ratio},{r['classification']},{r['expected']},"
                     f"{r['classification'] == r['expected']}")
    return "\n".join(lines) + "\n"
