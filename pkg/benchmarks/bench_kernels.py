#!/usr/bin/env python3
"""Benchmark the per-occasion radio kernels: numba backend vs NumPy fallback.

Runs the same workload through both implementations and reports per-call
times and the speedup.  Sizes mimic the full-scale individual scenario
(~850 transmissions, 36 TRPs, 53 BeRBs).

Usage: python benchmarks/bench_kernels.py [n_tx] [repeats]
"""
import sys
import time

import numpy as np

from beaconsim import kernels


def make_workload(rng, m, n_rx=36, n_berb=53, world=144.0):
    berb = np.sort(rng.integers(0, n_berb, m))
    counts = np.bincount(berb, minlength=n_berb)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return (
        rng.uniform(0, world, m), rng.uniform(0, world, m),
        np.full(m, 10 ** ((15 - 30) / 10)),
        rng.integers(0, 6, m), rng.integers(0, 2, m), offsets,
        rng.uniform(0, world, n_rx), rng.uniform(0, world, n_rx),
        rng.random((m, n_rx)) < 0.7, rng.normal(0, 3, (m, n_rx)),
        rng.exponential(1.0, (m, n_rx)),
        kernels.PL_MODEL_UMI, 3.5, 1.5, 10.0, 46.0, 3.0,
        10 ** ((-72.74 - 30) / 10), 7, 9.2103, 1, 1, 32.9, world, world,
    )


def bench(fn, args, repeats):
    fn(*args)  # warm-up (includes JIT compilation for the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main() -> None:
    m = int(sys.argv[1]) if len(sys.argv) > 1 else 850
    repeats = int(sys.argv[2]) if len(sys.argv) > 2 else 20
    rng = np.random.default_rng(0)
    args = make_workload(rng, m)

    t_np = bench(kernels.occasion_stats_np, args, repeats)
    print(f"occasion_stats numpy : {t_np * 1e3:8.2f} ms/occasion "
          f"({m} tx x 36 rx)")
    if kernels._USE_NUMBA:
        t_nb = bench(kernels._occasion_stats_nb, args, repeats)
        print(f"occasion_stats numba : {t_nb * 1e3:8.2f} ms/occasion")
        print(f"speedup              : {t_np / t_nb:8.1f}x")
        out_nb = kernels._occasion_stats_nb(*args)
        out_np = kernels.occasion_stats_np(*args)
        worst = max(float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
                    for a, b in zip(out_nb, out_np))
        print(f"max relative diff    : {worst:.2e}")
    else:
        print("numba backend unavailable or disabled "
              "(BEACONSIM_NO_NUMBA/NUMBA_DISABLE_JIT); numpy fallback only")
    print(f"active backend       : {kernels.backend_name()}")


if __name__ == "__main__":
    main()
