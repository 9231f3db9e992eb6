"""Time the numba and pure-numpy kernel backends on attack-scale inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 600]

The first numba call compiles (or loads the on-disk cache); it is reported
separately and excluded from the steady-state numbers.
"""
import argparse
import time

import numpy as np

from slowread.kernels import _numpy

try:
    from slowread.kernels import _numba
except ImportError:
    _numba = None


def inputs(n, seed=1):
    rng = np.random.default_rng(seed)
    size = np.full(n, 200_000, dtype=np.int64)
    window = rng.integers(8, 17, n, dtype=np.int64)
    rate = np.full(n, 5, dtype=np.int64)
    rtt = np.zeros(n, dtype=np.int64)
    opened = rng.integers(0, 10**8, 50 * n, dtype=np.int64)
    delivered = rng.integers(0, 10**6, 50 * n, dtype=np.int64)
    lengths = rng.integers(2, 2000, n)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    times = np.cumsum(rng.integers(1, 3_200_001, int(offsets[-1]))).astype(np.int64)
    at = np.sort(rng.integers(0, 3_600_000_000, 100 * n)).astype(np.int64)
    ok = rng.random(100 * n) < 0.5
    return {
        "chunk_drain_times": (size, window, rate, rtt),
        "throughput_mask": (opened, delivered, 2 * 10**8, 10**7, 100.0),
        "segment_max_gap": (offsets, times),
        "window_tally": (at, ok, 5_000_000, 721),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=600, help="connections")
    args = ap.parse_args()
    data = inputs(args.n)
    print(f"{'kernel':<20}{'numpy s':>12}{'numba s':>12}{'speedup':>10}{'first call s':>14}")
    for name, kargs in data.items():
        t_np = best_of(getattr(_numpy, name), kargs, args.repeat)
        if _numba is None:
            print(f"{name:<20}{t_np:>12.5f}{'-':>12}{'-':>10}{'-':>14}")
            continue
        fn = getattr(_numba, name)
        t0 = time.perf_counter()
        fn(*kargs)
        first = time.perf_counter() - t0
        t_nb = best_of(fn, kargs, args.repeat)
        print(f"{name:<20}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>9.1f}x{first:>14.3f}")


if __name__ == "__main__":
    main()
