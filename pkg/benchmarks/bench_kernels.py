"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 200 600 1200] [--repeat 5]

Prints the best-of-``repeat`` wall time per call for each kernel and backend,
the speedup, and the largest difference between the two results.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from bellcv._backend import compiled_kernels, python_kernels


def _bands(rng, size):
    offsets = np.array([-2, 0, 2], dtype=np.int64)
    bands = rng.normal(size=(3, size)) + 1j * rng.normal(size=(3, size))
    bands[0, :2] = 0
    bands[2, size - 2:] = 0
    return bands, offsets


def cases(size: int, rng):
    u = np.linspace(-8.0, 8.0, 257)
    bands, offsets = _bands(rng, size)
    left = rng.normal(size=(size, size))
    right = rng.normal(size=(size, size))
    return {
        "hermite_functions": lambda mod: mod.hermite_functions(u, size),
        "halfline_overlaps": lambda mod: mod.halfline_overlaps(0.37, size),
        "banded_bilinear": lambda mod: mod.banded_bilinear(bands, offsets, left, right),
    }


def best_time(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 600, 1200])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if compiled_kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<20}{'size':>6}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'max diff':>12}")
    for size in args.sizes:
        for name, run in cases(size, rng).items():
            diff = float(np.max(np.abs(np.asarray(run(python_kernels)) - np.asarray(run(compiled_kernels)))))
            t_py = best_time(lambda: run(python_kernels), args.repeat)
            t_c = best_time(lambda: run(compiled_kernels), args.repeat)
            print(f"{name:<20}{size:>6}{t_py * 1e3:>14.3f}{t_c * 1e3:>14.3f}{t_py / t_c:>10.1f}{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
