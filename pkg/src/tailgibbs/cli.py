"""Command-line entry point: ``tailgibbs {run,table2,oracle,diagnose}``.

Every output file embeds the resolved config (CSV: leading ``#`` line;
JSON: ``config`` field).  ``GSL_THREADS`` caps the parallel fan-out.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np
from statsmodels.tsa.stattools import acf

from . import config as C
from . import oracle
from .conditionals import SliceConfig, SliceError
from .diagnostics import DiagConfig, classify, max_workers, property_check, table2_cells, table2_long, \
    table2_matrix, table2_sweep
from .errors import ErrorDist
from .kernels import Trace, run_chain
from .latent_gp import LgpModel, MalaConfig, run_lgp_chain, simulate_data
from .model import HierModel, Parametrisation


# ------------------------------------------------------------ model helpers

def build_model(spec: dict[str, Any]) -> HierModel | LgpModel:
    if "latent_gp" not in spec:
        return HierModel.from_json(spec)
    g = spec["latent_gp"]
    f1 = ErrorDist.from_json(g["f1"]) if "f1" in g else ErrorDist.cauchy()
    if "y" in g:
        body = {k: v for k, v in g.items() if k != "simulate"}
        return LgpModel.from_json(body)
    if "phi" not in g or "p" not in g:
        raise C.ConfigError("latent_gp needs y, or p and phi with a simulate block")
    sim = g.get("simulate", {})
    model, _ = simulate_data(int(g["p"]), float(g["phi"]), float(g.get("marginal_var", 1.0)),
                             float(sim.get("theta", 0.0)), int(sim.get("seed", 0)), f1)
    return model


def _kernels(spec) -> list[Parametrisation]:
    items = spec if isinstance(spec, list) else [spec]
    return [Parametrisation.from_json(k) for k in items]


def _map(fn: Callable, items: list) -> list:
    workers = max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _slice_cfg(cfg: dict[str, Any]) -> SliceConfig:
    return SliceConfig(**cfg.get("slice", {}))


def _summary(trace: Trace) -> dict[str, Any]:
    th = trace.thetas[trace.burn_in:] if trace.burn_in < trace.n_iter else trace.thetas
    nlags = min(50, max(th.size - 1, 1))
    rho = acf(th, nlags=nlags, fft=True) if th.size > 1 and np.ptp(th) > 0 else np.ones(nlags + 1)
    out = {"kernel": trace.kernel_id, "theta0": trace.theta0, "n_iter": trace.n_iter, "burn_in": trace.burn_in,
           "min_theta": float(trace.thetas.min()), "max_theta": float(trace.thetas.max()),
           "acf": [float(v) for v in rho[1:]]}
    meta = trace.meta
    if "accept_rate" in meta:
        out["mala_accept_rate"] = meta["accept_rate"]
        out["final_step_size"] = meta["final_step_size"]
    if "mh_independence_accepts" in meta:
        out["independence_accept_rate"] = meta["mh_independence_accepts"] / trace.n_iter
    return out


# ---------------------------------------------------------------- commands

def cmd_run(cfg: dict[str, Any], out: Path) -> int:
    for key in ("model", "kernel", "run"):
        if key not in cfg:
            raise C.ConfigError(f"run needs a {key!r} block")
    model = build_model(cfg["model"])
    kernels = _kernels(cfg["kernel"])
    run = cfg["run"]
    t0s = run.get("theta0", 0.0)
    t0s = t0s if isinstance(t0s, list) else [t0s]
    seed = int(cfg.get("seed", run.get("seed", 0)))
    n_chains = int(run.get("n_chains", 1))
    jobs = [(k, t, c) for k in kernels for t in t0s for c in range(n_chains)]
    slice_cfg = _slice_cfg(cfg)
    mala = MalaConfig(**cfg.get("mala", {}))

    def one(job):
        kernel, theta0, chain = job
        index = chain if n_chains > 1 else None
        if isinstance(model, LgpModel):
            return run_lgp_chain(model, kernel.variant, theta0, mala, run["n_iter"], seed, run.get("burn_in", 0),
                                 run.get("record_x", False), slice_cfg, index)
        return run_chain(kernel, model, theta0, run["n_iter"], seed, slice_cfg, run.get("record_x", True),
                         run.get("burn_in", 0), index)

    traces = _map(one, jobs)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for (kernel, theta0, chain), tr in zip(jobs, traces):
        name = f"trace_{kernel.kernel_id}_theta0={theta0:g}_chain{chain}.csv"
        header = {"config": cfg, "seed": seed, "chain": {**tr.describe(), "chain": chain}}
        header["chain"].pop("model", None)
        tr.to_csv(out / name, header=C.jsonable(header))
        summaries.append({"file": name, "chain": chain, **_summary(tr)})
    (out / "summary.json").write_text(C.dumps({"config": cfg, "seed": seed, "chains": summaries}))
    return 0


def _parse_cell(text: str) -> list[tuple[str, str, float | None, str]]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise C.ConfigError("--cell takes f1,f2,par or f1,f2,par,ratio (e.g. C,G,P0 or E,E,P0,2)")
    f1, f2, par = parts[0].upper(), parts[1].upper(), parts[2].upper()
    if f1 not in "CEGL" or f2 not in "CEGL" or len(f1) != 1 or len(f2) != 1 or par not in ("P0", "P1"):
        raise C.ConfigError(f"bad cell {text!r}")
    cells = [c for c in table2_cells((par,)) if c[0] == f1 and c[1] == f2]
    if len(parts) == 4:
        cells = [c for c in cells if c[2] is not None and abs(c[2] - float(parts[3])) < 1e-12]
        if not cells:
            raise C.ConfigError(f"no (E,E) ratio {parts[3]} in the sweep")
    return cells


def cmd_table2(cfg: dict[str, Any], out: Path, cell: str | None = None) -> int:
    diag = DiagConfig.from_json(cfg.get("diag", {}))
    seed = int(cfg.get("seed", 0))
    cells = None
    filters = [cell] if cell else cfg.get("cells")
    if filters:
        cells = [c for f in filters for c in _parse_cell(f)]
    res = table2_sweep(diag, seed, cells)
    out.mkdir(parents=True, exist_ok=True)
    head = "# " + json.dumps(C.jsonable({"config": cfg, "seed": seed}), sort_keys=True) + "\n"
    (out / "table2_matrix.csv").write_text(head + table2_matrix(res), newline="")
    (out / "table2_long.csv").write_text(head + table2_long(res), newline="")
    (out / "table2_evidence.json").write_text(C.dumps({"config": cfg, "seed": seed, "cells": res}))
    n_bad = sum(r["classification"] != r["expected"] for r in res)
    sys.stdout.write(table2_matrix(res))
    sys.stdout.write(f"{len(res) - n_bad}/{len(res)} cells agree with the tail table\n")
    return 0


def _oracle_model(inputs: dict[str, Any]) -> HierModel:
    if "model" not in inputs:
        raise C.ConfigError("oracle query needs inputs.model")
    C.validate(inputs["model"], C._HIER_MODEL)
    return HierModel.from_json(inputs["model"])


def _reference(spec):
    if isinstance(spec, str):
        return spec
    if "loc" in spec:
        return (ErrorDist.from_json({k: v for k, v in spec.items() if k != "loc"}), float(spec["loc"]))
    return ErrorDist.from_json(spec)


ORACLE_QUERIES: dict[str, Callable[[dict[str, Any]], tuple[float, float]]] = {
    "normalizing_constant": lambda a: oracle.normalizing_constant(_oracle_model(a), a["theta"], full_output=True),
    "log_normalizing_constant": lambda a: oracle.log_normalizing_constant(_oracle_model(a), a["theta"],
                                                                          full_output=True),
    "conditional_mean": lambda a: oracle.conditional_mean(_oracle_model(a), a["theta"], full_output=True),
    "conditional_tail_prob": lambda a: oracle.conditional_tail_prob(
        _oracle_model(a), a["theta"], a["k"], a.get("frame", "centred"), full_output=True),
    "marginal_tail_prob": lambda a: oracle.marginal_tail_prob(_oracle_model(a), a["a"], full_output=True),
    "gaussian_rate": lambda a: (oracle.gaussian_rate(a["sigma1"], a["sigma2"], a["rho"]), 0.0),
    "cdf_distance": lambda a: (oracle.cdf_distance(_oracle_model(a), a["theta"], a.get("frame", "centred"),
                                                   _reference(a["reference"])), None),
}


def cmd_oracle(query: dict[str, Any]) -> dict[str, Any]:
    C.validate(query, C.QUERY_SCHEMA)
    name = query["query"]
    if name not in ORACLE_QUERIES:
        raise C.ConfigError(f"unknown oracle query {name!r}; known: {', '.join(sorted(ORACLE_QUERIES))}")
    try:
        value, err = ORACLE_QUERIES[name](query["inputs"])
    except KeyError as exc:
        raise C.ConfigError(f"oracle query {name!r} is missing input {exc}") from None
    return {"query": name, "inputs": query["inputs"], "value": float(value),
            "est_error": None if err is None else float(err)}


def cmd_diagnose(cfg: dict[str, Any], out: Path) -> int:
    for key in ("model", "kernel"):
        if key not in cfg:
            raise C.ConfigError(f"diagnose needs a {key!r} block")
    model = build_model(cfg["model"])
    if not isinstance(model, HierModel):
        raise C.ConfigError("diagnose supports the scalar hierarchical model only")
    diag = DiagConfig.from_json(cfg.get("diag", {}))
    seed = int(cfg.get("seed", 0))
    reports = [classify(k, model, diag, seed, _slice_cfg(cfg)).to_json() for k in _kernels(cfg["kernel"])]
    body: dict[str, Any] = {"config": cfg, "seed": seed, "reports": reports}
    if model.is_simple:
        body["properties"] = property_check(model, diag).to_json()
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(C.dumps(body))
    for r in reports:
        sys.stdout.write(f"{r['model_id']} {r['kernel_id']}: {r['classification']} ({r['evidence']})\n")
    return 0


# -------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tailgibbs", description="Gibbs samplers for heavy-tailed hierarchical "
                                 "models, a quadrature oracle and stability diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run chains and write trace CSVs plus summary.json"),
                           ("table2", "classify every tail-table cell"),
                           ("diagnose", "stability report for one model and kernel"),
                           ("oracle", "evaluate a quadrature-oracle query")):
        p = sub.add_parser(name, help=helptext)
        src = p.add_mutually_exclusive_group(required=name not in ("table2", "oracle"))
        src.add_argument("--config", help="path to a JSON config (query JSON for 'oracle')")
        src.add_argument("--preset", choices=C.PRESETS, help="shipped preset config")
        if name == "oracle":
            src.add_argument("--query", help="inline query JSON")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir or '.')")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "table2":
            p.add_argument("--cell", default=None, help="run one cell only: f1,f2,par[,ratio]")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "oracle":
            if args.query:
                query = json.loads(args.query)
            elif args.config:
                query = json.loads(Path(args.config).read_text())
            else:
                raise C.ConfigError("oracle needs --query or --config")
            result = cmd_oracle(query)
            text = C.dumps(result)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "oracle.json").write_text(text)
            sys.stdout.write(text)
            return 0
        if args.preset:
            cfg = C.preset(args.preset)
        elif args.config:
            cfg = C.load(args.config)
        else:
            cfg = {}
        cfg = C.with_seed(cfg, args.seed)
        out = Path(args.out or cfg.get("output_dir", "."))
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.command == "table2":
            return cmd_table2(cfg, out, args.cell)
        return cmd_diagnose(cfg, out)
    except (C.ConfigError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"tailgibbs: {exc}\n")
        return 2
    except (SliceError, ValueError, FloatingPointError, oracle.QuadratureError) as exc:
        sys.stderr.write(f"tailgibbs {args.command}: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
