"""Timing of the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``; prints one row per kernel and size.
"""

import argparse
import timeit

import numpy as np

from singclt import _kernels_py

try:
    from singclt import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def cases(rng, n):
    r = rng.standard_normal(n)
    c = np.cos(0.3 * np.arange(n)) / (1.0 + np.arange(n)) ** 0.35
    x = np.logspace(-3, 1.5, n)
    return {
        "k4_pattern_sum": lambda mod: mod.k4_pattern_sum(r, c, c ** 2, c ** 3),
        "toeplitz_bilinear": lambda mod: mod.toeplitz_bilinear(r, r[::-1].copy(), c),
        "bessel_k_scaled": lambda mod: mod.bessel_k_scaled(0.15, x, 1.0),
    }


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>6}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for n in args.sizes:
        for name, call in cases(rng, n).items():
            t_py = best_of(lambda: call(_kernels_py), args.repeat)
            if _kernels_c is None:
                print(f"{name:<20}{n:>6}{1e3 * t_py:>14.3f}{'n/a':>14}{'':>10}")
                continue
            t_c = best_of(lambda: call(_kernels_c), args.repeat)
            print(f"{name:<20}{n:>6}{1e3 * t_py:>14.3f}{1e3 * t_c:>14.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
