#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-numpy fallbacks.

Times the three hot paths on representative workloads and prints a small
table.  Run after an editable install:

    python3 benchmarks/bench_kernels.py [--repeats 5]

Setting MIXPC_PURE_NUMPY=1 disables the compiled path entirely; here both
flavours are imported side by side, so the flag is not needed.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from mixpc import _kernels
from mixpc.rng import rng_for


def _time(fn, *args, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_ompc(repeats: int) -> tuple[float, float, int]:
    g = rng_for(1, "bench-ompc")
    m, n, r = 16, 120, 24
    pt = (g.random((m, n)) * (g.random((m, n)) < 0.4)) + 0.01
    idx = np.sort(g.choice(n, size=r, replace=False)).astype(np.int64)
    val = 1.0 + g.random(r)
    mu = 1.0 + 1.0 / (3.0 * math.log(math.e * m))
    fail = 3.0 * math.log(math.e * m)

    def run(kernel):
        x = np.full(n, 1e-4)
        pvx = pt @ x
        z = np.zeros(m)
        return kernel(pt, idx, val, x, pvx, z, 0.0, mu, fail, 100_000, 1e-12)

    phases = run(_kernels.ompc_row_phases_numpy)[1]
    t_np = _time(run, _kernels.ompc_row_phases_numpy, repeats=repeats)
    t_nb = math.nan
    if _kernels.USING_NUMBA:
        run(_kernels.ompc_row_phases_numba)  # compile outside the clock
        t_nb = _time(run, _kernels.ompc_row_phases_numba, repeats=repeats)
    return t_np, t_nb, phases


def bench_ccfl(repeats: int) -> tuple[float, float, int]:
    g = rng_for(2, "bench-ccfl")
    m, n, f = 12, 40, 10
    fac = np.sort(g.choice(m, size=f, replace=False)).astype(np.int64)
    p = 0.1 + g.random(f)
    a = 0.5 * g.random(f)
    c = 1.0 + g.random(m)
    zz = 30.0
    mu = 1.0 + 1.0 / (6.0 * math.log(math.e * m * n))
    fail = 5.0 * zz * math.log(math.e * m * n)

    def run(kernel):
        x_j = np.full(f, 1.0 / (2 * m * n))
        at_max = np.zeros(f, dtype=np.bool_)
        at_max[0] = True
        grew = np.zeros(f, dtype=np.bool_)
        rowmax = np.zeros(m)
        rowmax[fac] = x_j
        load = np.zeros(m)
        load[fac] = p * x_j
        chi = np.zeros(f)
        eta = np.zeros(m)
        return kernel(
            fac, p, a, c, x_j, at_max, grew, rowmax, load, chi, eta,
            float(m * n - f), 0.0, zz, 1.0, mu, fail, 100_000,
        )

    phases = run(_kernels.ccfl_client_phases_numpy)[1]
    t_np = _time(run, _kernels.ccfl_client_phases_numpy, repeats=repeats)
    t_nb = math.nan
    if _kernels.USING_NUMBA:
        run(_kernels.ccfl_client_phases_numba)
        t_nb = _time(run, _kernels.ccfl_client_phases_numba, repeats=repeats)
    return t_np, t_nb, phases


def bench_mc(repeats: int) -> tuple[float, float, int]:
    g = rng_for(3, "bench-mc")
    m, n, r, reps = 5, 20, 33, 4096
    xcl = g.random((n, m))
    yat = xcl + 0.1
    p = 0.2 * g.random((n, m))
    cfix = 1.0 + g.random(m)
    in_s = xcl >= 1.0 / (2 * m)
    tdraw = g.random((reps, m, r))
    udraw = g.random((reps, n, m))
    args = (xcl, yat, yat[-1], p, cfix, in_s, tdraw, udraw)

    t_np = _time(_kernels.mc_round_chunk_numpy, *args, repeats=repeats)
    t_nb = math.nan
    if _kernels.USING_NUMBA:
        _kernels.mc_round_chunk_numba(*args)
        t_nb = _time(_kernels.mc_round_chunk_numba, *args, repeats=repeats)
    return t_np, t_nb, reps


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rows = [
        ("packing/covering row phases", *bench_ompc(args.repeats), "phases"),
        ("assignment client phases", *bench_ccfl(args.repeats), "phases"),
        ("rounding sweep (4096 reps)", *bench_mc(args.repeats), "reps"),
    ]
    print(f"numba available: {_kernels.USING_NUMBA}")
    print(f"{'kernel':<30} {'numpy':>10} {'numba':>10} {'speedup':>8}  work")
    for name, t_np, t_nb, work, unit in rows:
        if math.isnan(t_nb):
            print(f"{name:<30} {t_np * 1e3:>8.2f}ms {'-':>10} {'-':>8}  {work} {unit}")
        else:
            print(
                f"{name:<30} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
                f"{t_np / t_nb:>7.1f}x  {work} {unit}"
            )


if __name__ == "__main__":
    main()
