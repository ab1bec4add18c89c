#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each kernel on DP-training-shaped inputs (per-example gradient matrices,
randomized-response bit blocks), checks both paths agree, and prints a timing
table. The numba path is what dpmi uses unless DPMI_NUMBA=0.
"""

import time

import numpy as np

from dpmi import kernels

if not kernels.NUMBA_REQUESTED:
    raise SystemExit("unset DPMI_NUMBA before benchmarking (the numba path is disabled)")
if not kernels.NUMBA_ACTIVE:
    raise SystemExit("numba failed to import; nothing to compare")


def bench(fn, *args, repeat=20):
    fn(*args)  # warm up (and JIT-compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    rng = np.random.default_rng(0)
    rows = []

    for lot, p in [(64, 2000), (128, 20000), (256, 100000)]:
        g = rng.normal(size=(lot, p))
        t_nb = bench(kernels._numba_clip_rows_sum, g, 1.0)
        t_np = bench(kernels._numpy_clip_rows_sum, g, 1.0)
        s_nb, _ = kernels._numba_clip_rows_sum(g, 1.0)
        s_np, _ = kernels._numpy_clip_rows_sum(g, 1.0)
        assert np.allclose(s_nb, s_np, atol=1e-9)
        rows.append((f"clip_rows_sum {lot}x{p}", t_np, t_nb))

    for n, d in [(1000, 600), (10000, 600), (2000, 6382)]:
        bits = (rng.random((n, d)) < 0.3).astype(np.float64)
        u1, u2 = rng.random(bits.shape), rng.random(bits.shape)
        t_nb = bench(kernels._numba_rr_bits, bits, 0.5, u1, u2, repeat=5)
        t_np = bench(kernels._numpy_rr_bits, bits, 0.5, u1, u2, repeat=5)
        assert np.array_equal(kernels._numba_rr_bits(bits, 0.5, u1, u2),
                              kernels._numpy_rr_bits(bits, 0.5, u1, u2))
        rows.append((f"rr_bits {n}x{d}", t_np, t_nb))

    print(f"{'kernel':<28} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(f"{name:<28} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
              f"{t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
