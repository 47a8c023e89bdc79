"""Gibbs transition kernels and the chain runner.

Random streams: a run with ``seed`` and ``n_chains > 1`` gives chain ``i``
the generator ``PCG64(SeedSequence(seed, spawn_key=(i,)))``; a single chain
uses ``default_rng(seed)``.  Kernels never discard iterations; burn-in is
recorded on the trace for downstream use only.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import _chain
from ._slice import OK
from .conditionals import DEFAULT_SLICE, SliceConfig, SliceError, _model_args, _slice_args, _work, pack
from .model import HierModel, Parametrisation

_CODES = {
    "centred": _chain.CENTRED,
    "noncentred": _chain.NONCENTRED,
    "partial": _chain.PARTIAL,
    "grouped": _chain.GROUPED,
    "hybrid": _chain.HYBRID,
}


def make_rng(seed: int, chain_index: int | None = None) -> np.random.Generator:
    if chain_index is None:
        return np.random.default_rng(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain_index,))))


def _kernel_args(kernel: Parametrisation, model: HierModel):
    if kernel.variant == "grouped":
        if model.f1.kind != "cauchy" or model.f2.kind != "gauss":
            raise ValueError("the grouped sampler needs Cauchy observation error and Gaussian hidden error")
    code = _CODES[kernel.variant]
    rho = kernel.rho if kernel.rho is not None else 0.0
    p_mix = kernel.p_mix if kernel.p_mix is not None else 0.5
    return code, float(rho), float(p_mix), bool(kernel.likelihood_q_rate)


@dataclass
class ChainState:
    theta: float
    x: np.ndarray
    q: np.ndarray | None = None

    def copy(self) -> ChainState:
        return ChainState(self.theta, self.x.copy(), None if self.q is None else self.q.copy())


@dataclass
class Trace:
    thetas: np.ndarray
    xs: np.ndarray | None
    seed: int
    kernel_id: str
    n_iter: int
    burn_in: int = 0
    theta0: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.thetas) != self.n_iter:
            raise ValueError("trace length does not match n_iter")

    def to_csv(self, path: str | Path | None = None, header: dict[str, Any] | None = None) -> str:
        """Write ``iter,theta[,x_1..x_m]`` with full float precision.

        ``header`` (default: the trace metadata) goes on a leading ``#`` line.
        """
        buf = io.StringIO()
        info = dict(header) if header is not None else self.describe()
        buf.write("# " + json.dumps(info, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = ["iter", "theta"]
        if self.xs is not None:
            cols += [f"x_{i + 1}" for i in range(self.xs.shape[1])]
        w.writerow(cols)
        for n in range(self.n_iter):
            row = [str(n + 1), repr(float(self.thetas[n]))]
            if self.xs is not None:
                row += [repr(float(v)) for v in self.xs[n]]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    def describe(self) -> dict[str, Any]:
        return {"seed": self.seed, "kernel": self.kernel_id, "n_iter": self.n_iter, "burn_in": self.burn_in,
                "theta0": self.theta0, **self.meta}

    @classmethod
    def from_csv(cls, path: str | Path) -> Trace:
        lines = Path(path).read_text().splitlines()
        meta: dict[str, Any] = {}
        if lines and lines[0].startswith("#"):
            meta = json.loads(lines[0][1:].strip())
            lines = lines[1:]
        rows = list(csv.reader(lines))
        cols = rows[0]
        data = np.array([[float(v) for v in r] for r in rows[1:]]) if len(rows) > 1 else np.zeros((0, len(cols)))
        xs = data[:, 2:] if len(cols) > 2 else None
        info = meta.get("chain", meta)
        return cls(data[:, 1].copy(), xs, int(info.get("seed", 0)), str(info.get("kernel", "")), data.shape[0],
                   int(info.get("burn_in", 0)), float(info.get("theta0", 0.0)), meta)


def step(kernel: Parametrisation, model: HierModel, state: ChainState, rng: np.random.Generator,
         cfg: SliceConfig = DEFAULT_SLICE) -> ChainState:
    """One transition of the chosen Gibbs sampler; returns a new state."""
    code, rho, p_mix, lik_rate = _kernel_args(kernel, model)
    p = pack(model)
    new = state.copy()
    if new.x.shape != (model.m,):
        raise ValueError("state.x does not match the model dimension")
    if new.q is None:
        new.q = np.ones(p.yf.size)
    theta, st, _ = _chain.step(code, rho, p_mix, lik_rate, float(state.theta), new.x, new.q, int(cfg.n_sweeps),
                               *_model_args(p), *_slice_args(cfg, model), rng, *_work(p), p.xbuf)
    if st != OK:
        raise SliceError(f"{kernel.kernel_id} step failed", state.theta, state.x)
    new.theta = float(theta)
    if kernel.variant != "grouped":
        new.q = None
    return new


def initial_state(kernel: Parametrisation, model: HierModel, theta0: float, rng: np.random.Generator,
                  cfg: SliceConfig = DEFAULT_SLICE) -> ChainState:
    _kernel_args(kernel, model)
    p = pack(model)
    x = np.empty(model.m)
    st = _chain.init_x(float(theta0), x, int(cfg.n_burn), *_model_args(p), *_slice_args(cfg, model), rng, *_work(p))
    if st != OK:
        raise SliceError("initial X draw failed", theta0, None)
    q = np.ones(p.yf.size) if kernel.variant == "grouped" else None
    return ChainState(float(theta0), x, q)


def run_chain(kernel: Parametrisation, model: HierModel, theta0: float, n_iter: int, seed: int,
              cfg: SliceConfig = DEFAULT_SLICE, record_x: bool = True, burn_in: int = 0,
              chain_index: int | None = None) -> Trace:
    """Run ``n_iter`` Gibbs iterations from ``theta0``.

    X is initialised by one conditional draw given ``theta0``.  The trace
    holds Theta_1..Theta_n (and X_n) on the model scale.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    code, rho, p_mix, lik_rate = _kernel_args(kernel, model)
    rng = make_rng(seed, chain_index)
    state = initial_state(kernel, model, theta0, rng, cfg)
    p = pack(model)
    q = state.q if state.q is not None else np.ones(p.yf.size)
    thetas = np.empty(n_iter)
    xs = np.empty((n_iter, model.m)) if record_x else np.empty((1, model.m))
    st, fail_it, acc = _chain.run(code, rho, p_mix, lik_rate, float(theta0), state.x, q, int(n_iter), bool(record_x),
                                  int(cfg.n_sweeps), *_model_args(p), *_slice_args(cfg, model), rng, *_work(p),
                                  p.xbuf, thetas, xs)
    if st != OK:
        raise SliceError(f"{kernel.kernel_id} chain failed at iteration {fail_it}", None, None)
    meta = {"model": model.to_json(), "mh_independence_accepts": int(acc)}
    if chain_index is not None:
        meta["chain_index"] = chain_index
    return Trace(thetas, xs if record_x else None, seed, kernel.kernel_id, n_iter, burn_in, float(theta0), meta)


def one_step(kernel: Parametrisation, model: HierModel, theta0: float, n_rep: int, rng: np.random.Generator,
             cfg: SliceConfig = DEFAULT_SLICE, x0=None) -> tuple[np.ndarray, np.ndarray]:
    """``n_rep`` independent transitions from theta0 (X refreshed each time).

    For the grouped kernel the start is the latent ``x0`` (default: theta0
    in every coordinate) and the returned X are the monitored chain.
    """
    code, rho, p_mix, lik_rate = _kernel_args(kernel, model)
    p = pack(model)
    if x0 is None:
        x0 = np.full(model.m, float(theta0))
    x0 = np.ascontiguousarray(np.atleast_1d(np.asarray(x0, dtype=float)))
    th = np.empty(int(n_rep))
    xs = np.empty((int(n_rep), model.m))
    st, r = _chain.one_step_batch(code, rho, p_mix, lik_rate, float(theta0), x0, int(n_rep), int(cfg.n_burn),
                                  int(cfg.n_sweeps), *_model_args(p), *_slice_args(cfg, model), rng, *_work(p),
                                  p.xbuf, th, xs)
    if st != OK:
        raise SliceError(f"{kernel.kernel_id} one-step draw {r} failed", theta0, None)
    return th, xs


def first_entry_time(kernel: Parametrisation, model: HierModel, theta0: float, radius: float, max_iter: int,
                     rng: np.random.Generator, cfg: SliceConfig = DEFAULT_SLICE) -> int | None:
    """Iterations until |Theta_n| <= radius; ``None`` when censored."""
    code, rho, p_mix, lik_rate = _kernel_args(kernel, model)
    state = initial_state(kernel, model, theta0, rng, cfg)
    p = pack(model)
    q = state.q if state.q is not None else np.ones(p.yf.size)
    n, st = _chain.first_entry(code, rho, p_mix, lik_rate, float(theta0), state.x, q, float(radius), int(max_iter),
                               int(cfg.n_sweeps), *_model_args(p), *_slice_args(cfg, model), rng, *_work(p), p.xbuf)
    if st != OK:
        raise SliceError(f"{kernel.kernel_id} failed while timing return from {theta0}", theta0, None)
    return None if n < 0 else int(n)
