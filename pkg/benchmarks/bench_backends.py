"""Compare the compiled (numba) and vectorised (numpy) particle kernels.

Usage: ``python benchmarks/bench_backends.py [--paths N] [--reps R]``.  Each
workload is run once to warm up (JIT compilation) and then timed.
"""
import argparse
import os
import time

import numpy as np

from stablebranch import _backend
from stablebranch import rng as rngmod
from stablebranch.branching import run_replication
from stablebranch.catalyst import KernelCatalyst, OffspringLaw, PointMass
from stablebranch.config import config_from_dict
from stablebranch.kernels import run_paths
from stablebranch.stable import StableParams


def paths_workload(n):
    cfg = config_from_dict({})
    enc = KernelCatalyst(cfg.catalyst, 1.5, 1, 1.0)
    A, _, _ = run_paths([0.0], n, [5.0], 1.5, enc, cfg.step_rule(), rngmod.stream(1))
    return float(A.mean())


def branching_workload(reps):
    cfg = config_from_dict({"catalyst": {"type": "point", "mass": 0.6}})
    sizes = [run_replication(StableParams(1.5), PointMass(0.6), OffspringLaw({2: 1.0}), [0.0],
                             [20.0], cfg.step_rule(), 1, rep).final_size for rep in range(reps)]
    return float(np.mean(sizes))


def timed(fn, arg):
    fn(max(arg // 50, 2))
    t0 = time.perf_counter()
    out = fn(arg)
    return time.perf_counter() - t0, out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--reps", type=int, default=50)
    args = p.parse_args()
    rows = []
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _backend.HAVE_NUMBA:
            continue
        os.environ[_backend.ENV_VAR] = backend
        tp, a = timed(paths_workload, args.paths)
        tb, n = timed(branching_workload, args.reps)
        rows.append((backend, tp, a, tb, n))
    # the two backends draw different random populations, so branching cost is
    # compared per simulated particle rather than per replication
    print(f"{'backend':<8} {'paths [s]':>10} {'mean A_5':>10} {'branching [s]':>14} "
          f"{'mean N_20':>10} {'us/particle':>12}")
    per = {}
    for backend, tp, a, tb, n in rows:
        per[backend] = 1e6 * tb / (n * args.reps)
        print(f"{backend:<8} {tp:>10.2f} {a:>10.4f} {tb:>14.2f} {n:>10.1f} {per[backend]:>12.1f}")
    if len(rows) == 2:
        print(f"speed-up (numpy / numba): paths {rows[1][1] / rows[0][1]:.1f}x, "
              f"branching per particle {per['numpy'] / per['numba']:.1f}x")


if __name__ == "__main__":
    main()
