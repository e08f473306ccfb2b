#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--repeat N]

The numpy implementations are always importable, so both paths run in one
process regardless of PCBLS_NO_NUMBA. With numba disabled the script still
runs and reports the numpy timings alone.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pcbls import _kernels


def timeit(fn, *args, repeat: int, warmup: int = 2) -> float:
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = []

    src = rng.normal(size=(64, 64))
    ker3 = rng.uniform(size=(3, 3))
    ker3 /= ker3.sum()
    ker7 = rng.uniform(size=(7, 7))
    ker7 /= ker7.sum()
    cases.append(("conv2d 64x64 k=3", _kernels.conv2d_replicate, _kernels.conv2d_replicate_np, (src, ker3)))
    cases.append(("conv2d 64x64 k=7", _kernels.conv2d_replicate, _kernels.conv2d_replicate_np, (src, ker7)))

    x = rng.normal(size=(32, 32, 3))
    w = rng.normal(size=(8, 3, 3, 3))
    b = rng.normal(size=8)
    cases.append(("fcn fwd 32x32 3->8", _kernels.fcn_conv_forward, _kernels.fcn_conv_forward_np, (x, w, b)))

    dout = rng.normal(size=(32, 32, 8))
    cases.append(("fcn bwd 32x32 3->8", _kernels.fcn_conv_backward, _kernels.fcn_conv_backward_np, (x, w, dout)))

    img = rng.uniform(size=(64, 64, 3))
    offsets = rng.integers(-2, 3, size=(3, 64, 64, 2)).astype(np.int64)
    cases.append(("glass swaps 64x64 x3", _kernels.glass_swaps, _kernels.glass_swaps_np, (img, offsets)))

    print(f"numba path: {'enabled' if _kernels.USE_NUMBA else 'DISABLED (numpy only)'}")
    print(f"{'kernel':<24}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, fast, slow, call_args in cases:
        t_np = timeit(slow, *call_args, repeat=args.repeat)
        if _kernels.USE_NUMBA:
            t_nb = timeit(fast, *call_args, repeat=args.repeat)
            print(f"{name:<24}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<24}{t_np * 1e3:>10.3f}ms{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
