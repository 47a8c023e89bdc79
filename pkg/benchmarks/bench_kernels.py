"""Compare the numba kernels with the pure-Python fallback.

Each path runs in its own interpreter because the switch
(``TAILGIBBS_DISABLE_JIT``) is read at import time.  The JIT path is timed
after a warm-up call so compilation is excluded.

    python benchmarks/bench_kernels.py [--n-iter 2000]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from tailgibbs import ErrorDist, HierModel, Parametrisation, USE_JIT, run_chain
from tailgibbs.kernels import make_rng, one_step
from tailgibbs.latent_gp import coordinate_sampler, simulate_data

n = int(sys.argv[1])
cg = HierModel.simple(ErrorDist.cauchy(), ErrorDist.gauss(5 ** 0.5), 0.0)
lgp, _ = simulate_data(20, 0.9, 1.0, 0.0, seed=1)
cases = {
    "centred chain": lambda k: run_chain(Parametrisation.centred(), cg, 0.0, k, seed=0, record_x=False),
    "noncentred chain": lambda k: run_chain(Parametrisation.noncentred(), cg, 0.0, k, seed=0, record_x=False),
    "grouped chain": lambda k: run_chain(Parametrisation.grouped(), cg, 0.0, k, seed=0, record_x=False),
    "one-step batch": lambda k: one_step(Parametrisation.centred(), cg, 1e3, k, make_rng(0)),
    "latent GP coordinate sweeps": lambda k: coordinate_sampler(lgp, 0.0, max(1, k // 20), make_rng(0)),
}
out = {"jit": USE_JIT, "n": n, "seconds": {}}
for name, fn in cases.items():
    fn(10)
    t0 = time.perf_counter()
    fn(n)
    out["seconds"][name] = time.perf_counter() - t0
json.dump(out, sys.stdout)
"""


def run(n: int, disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("TAILGIBBS_DISABLE_JIT", None)
    if disable:
        env["TAILGIBBS_DISABLE_JIT"] = "1"
    r = subprocess.run([sys.executable, "-c", WORKLOAD, str(n)], capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-iter", type=int, default=2000)
    args = ap.parse_args()
    fast, slow = run(args.n_iter, False), run(args.n_iter, True)
    print(f"{'workload':<30}{'numba (s)':>12}{'python (s)':>12}{'speed-up':>10}")
    for name, t_fast in fast["seconds"].items():
        t_slow = slow["seconds"][name]
        print(f"{name:<30}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>9.0f}x")


if __name__ == "__main__":
    main()
