"""Compare the numba and pure-numpy window kernels.

    python3 benchmarks/bench_backends.py [--lengths 512,2048,8192] [--repeats 5]

Both backends are always run in-process through the ``use_numba`` switch, so
the ATTNBENCH_NUMBA flag does not matter here. Prints median seconds and the
max absolute difference between the two outputs.
"""

import argparse
import statistics
import time

import numpy as np

from attnbench.mechanisms._kernels import window_prefix, window_shared


def _inputs(n, d, window, slots, rng):
    q, k, v = (rng.standard_normal((n, d)) for _ in range(3))
    i = np.arange(n)
    lo = np.maximum(0, i - window + 1)
    hi = i + 1
    logits = rng.standard_normal((n, slots))
    return q, k, v, lo, hi, logits


def _median_time(fn, repeats):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lengths", default="512,2048,8192")
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--window", type=int, default=64)
    parser.add_argument("--slots", type=int, default=16)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'n':>7}{'numba s':>12}{'numpy s':>12}{'speedup':>9}{'max diff':>11}")
    for n in (int(x) for x in args.lengths.split(",")):
        q, k, v, lo, hi, logits = _inputs(n, args.dim, args.window, args.slots, rng)
        mk, mv = k[: args.slots], v[: args.slots]
        kernels = {
            "window_shared": lambda nb: window_shared(q, k, v, lo, hi, mk, mv, use_numba=nb),
            "window_prefix": lambda nb: window_prefix(q, k, v, lo, hi, logits, logits, use_numba=nb),
        }
        for name, kernel in kernels.items():
            t_nb, out_nb = _median_time(lambda: kernel(True), args.repeats)
            t_np, out_np = _median_time(lambda: kernel(False), args.repeats)
            diff = float(np.abs(out_nb - out_np).max())
            print(f"{name:<14}{n:>7}{t_nb:>12.5f}{t_np:>12.5f}{t_np / t_nb:>8.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
