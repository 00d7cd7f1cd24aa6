"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--frames N ...] [--repeat R]

The default sizes cover a typical track (200 frames) and a long one.
"""

import argparse
import timeit

import numpy as np

from evtmatch import _kernels_py as py
from evtmatch.sgfilter import derive_kernel

try:
    from evtmatch import _kernels as cy
except ImportError:  # extension not built
    cy = None


def cases(frames, rng):
    padded = rng.standard_normal(frames + 10)
    coeffs = derive_kernel(5, 2).as_array()
    scores = np.convolve(rng.random(frames), np.ones(9) / 9, mode="same")
    a = np.sort(rng.uniform(0, frames, (200, 2)), axis=1)
    b = np.sort(rng.uniform(0, frames, (50, 2)), axis=1)
    return {
        "correlate_valid": lambda m: m.correlate_valid(padded, coeffs),
        "threshold_runs": lambda m: m.threshold_runs(scores, 0.5),
        "local_maxima": lambda m: m.local_maxima(scores),
        "pairwise_iou": lambda m: m.pairwise_iou(a, b),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, nargs="+", default=[200, 20000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    for frames in args.frames:
        run(frames, args.repeat)


def run(frames, repeat):
    rng = np.random.default_rng(0)
    print(f"\n{frames} frames")
    print(f"{'kernel':<18}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(frames, rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat)) * 1e3
        if cy is None:
            print(f"{name:<18}{t_py:>12.3f}{'n/a':>12}{'':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat)) * 1e3
        print(f"{name:<18}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
