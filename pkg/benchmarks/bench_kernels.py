"""Time the compiled and pure-Python staircase routing kernels.

    python3 benchmarks/bench_kernels.py [--sizes 10 40 160] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from chargegrid import _kernels_py

try:
    from chargegrid import _kernels
except ImportError:
    _kernels = None


def instance(n, seed):
    rng = np.random.default_rng(seed)
    xs = np.concatenate([[0.0], np.sort(rng.random(n - 2)) * 1000, [1000.0]])
    ys = np.concatenate([[0.0], np.sort(rng.random(n - 2)) * 1000, [1000.0]])
    ck = rng.integers(0, 2, n).astype(np.int8)
    rk = rng.integers(0, 2, n).astype(np.int8)
    return xs, ck, ys, rk


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 40, 160])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'lines/axis':>10} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in args.sizes:
        xs, ck, ys, rk = instance(n, n)
        number = max(1, 20000 // (n * n))
        py = min(timeit.repeat(lambda: _kernels_py.route_box(xs, ck, ys, rk, False),
                               number=number, repeat=args.repeat)) / number
        if _kernels is None:
            print(f"{n:>10} {py * 1e3:>10.3f} {'n/a':>10} {'n/a':>8}")
            continue
        cy = min(timeit.repeat(lambda: _kernels.route_box(xs, ck, ys, rk, False),
                               number=number * 50, repeat=args.repeat)) / (number * 50)
        assert _kernels.route_box(xs, ck, ys, rk, False)[:3] == \
            _kernels_py.route_box(xs, ck, ys, rk, False)[:3]
        print(f"{n:>10} {py * 1e3:>10.3f} {cy * 1e3:>10.4f} {py / cy:>8.0f}x")


if __name__ == "__main__":
    main()
