#!/usr/bin/env python3
"""Timing comparison: compiled kernels vs the numpy fallback.

Run from the repo root:

    python3 benchmarks/bench_kernels.py

Both backends compute identical bits (tests/test_kernels.py); this shows
what the compiled path buys in wall time for the three hot kernels.
"""

import time

import numpy as np

from spd._kernels import fallback as fb
from spd.rng import Rng

try:
    from spd._kernels import _ext as ext
except ImportError:
    ext = None


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_adamw():
    rng = Rng(0)
    n = 200_000
    p = rng.uniform(-1, 1, n)
    g = rng.uniform(-1, 1, n)
    m = np.zeros(n)
    v = np.zeros(n)
    args = (0.001, 0.9, 0.999, 1e-8, 0.01, 0.1, 0.001)

    def run(impl):
        impl.adamw_update(p.copy(), g, m.copy(), v.copy(), *args)

    return "adamw_update (200k params)", run


def bench_subset_sums():
    w = Rng(1).uniform(-1, 1, 22)

    def run(impl):
        impl.subset_sums(w)

    return "subset_sums (2^22 sums)", run


def bench_min_gap_grid():
    rng = Rng(2)
    a = np.sort(fb.subset_sums(rng.uniform(-1, 1, 12)))
    b = np.sort(fb.subset_sums(rng.uniform(-1, 1, 12)))
    targets = np.arange(-0.5, 0.5001, 0.01)

    def run(impl):
        impl.min_gap_grid(a, b, targets)

    return "min_gap_grid (4096x4096, 101 targets)", run


def main():
    if ext is None:
        print("compiled backend unavailable; build the extension first "
              "(pip install -e . --no-build-isolation)")
        return
    print(f"{'kernel':<42} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for make in (bench_adamw, bench_subset_sums, bench_min_gap_grid):
        label, run = make()
        t_py = timeit(lambda: run(fb))
        t_c = timeit(lambda: run(ext))
        print(f"{label:<42} {t_py * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms "
              f"{t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
