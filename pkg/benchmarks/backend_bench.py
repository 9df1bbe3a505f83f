"""Benchmark the per-path scan kernel backends.

Runs the same simulation through the compiled (numba) kernel and the pure
numpy fallback, reports wall time and throughput for each, and checks that
the two backends agree on every statistic.

Usage:
    python3 benchmarks/backend_bench.py [--paths N] [--dt DT]
"""

import argparse
import math
import time

import numpy as np

from lastzero import _scan
from lastzero.boundary import solve_boundary_brownian
from lastzero.gain import GainContext
from lastzero.models import LevyModel
from lastzero.simulator import (SimConfig, boundary_rule, constant_level_rule,
                                evaluate_rules, zero_rule)

THETA = math.log(2.0) / 10.0


def run_once(cfg, rules, kernel):
    saved = _scan.path_stats
    _scan.path_stats = kernel
    try:
        start = time.perf_counter()
        rep = evaluate_rules(cfg, rules)
        elapsed = time.perf_counter() - start
    finally:
        _scan.path_stats = saved
    return rep, elapsed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--dt", type=float, default=1e-3)
    args = parser.parse_args()

    results = []
    for label, model in [("brownian", LevyModel.brownian(2.0, 1.0)),
                         ("jump", LevyModel.jump_diffusion(3.0, 1.0, 1.0, 1.0))]:
        ctx = GainContext.create(model, THETA)
        if model.kind == "brownian":
            grid = solve_boundary_brownian(ctx, 100)
            rules = [boundary_rule(grid, name="optimal"), zero_rule(),
                     constant_level_rule(float(grid.b[0]))]
        else:
            rules = [zero_rule(), constant_level_rule(0.4)]
        cfg = SimConfig(model=model, theta=THETA, dt=args.dt,
                        n_paths=args.paths, seed=0, bridge_min=True)

        # warm up JIT compilation outside the timed region
        warm = SimConfig(model=model, theta=THETA, dt=args.dt, n_paths=50,
                         seed=0, bridge_min=True)
        run_once(warm, rules, _scan.path_stats)

        rep_nb, t_nb = run_once(cfg, rules, _scan.path_stats)
        rep_py, t_py = run_once(cfg, rules, _scan._path_stats_py)

        agree = (np.allclose(rep_nb.g, rep_py.g, rtol=0, atol=1e-10)
                 and np.allclose(rep_nb.mins, rep_py.mins, rtol=0, atol=1e-10)
                 and np.allclose(rep_nb.losses, rep_py.losses, rtol=0,
                                 atol=1e-10))
        results.append((label, t_nb, t_py, agree))

    print(f"\n{args.paths} paths, dt = {args.dt}, default backend = "
          f"{_scan.BACKEND}")
    print(f"{'model':<10} {'numba [s]':>10} {'numpy [s]':>10} "
          f"{'speedup':>8} {'agree':>6}")
    for label, t_nb, t_py, agree in results:
        print(f"{label:<10} {t_nb:>10.2f} {t_py:>10.2f} "
              f"{t_py / t_nb:>7.1f}x {str(agree):>6}")


if __name__ == "__main__":
    main()
