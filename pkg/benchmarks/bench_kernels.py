"""Compare the compiled and pure-Python kernel backends.

Runs the counter-based generator and the pairwise reduction through both
implementations on identical inputs, checks bit equality, and prints
throughput. Usage:

    python benchmarks/bench_kernels.py [--blocks N] [--reduce N] [--repeat K]
"""

import argparse
import time

import numpy as np

from forwardperf.kernels import reference

try:
    from forwardperf.kernels import _core
except ImportError:
    _core = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--blocks", type=int, default=1_000_000, help="generator blocks")
    parser.add_argument("--reduce", type=int, default=4_000_000, help="reduction length")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = parser.parse_args()

    if _core is None:
        print("compiled backend not built; only timing the reference kernels")

    n = args.blocks
    c0 = np.arange(n, dtype=np.uint64)
    c1 = np.zeros(n, dtype=np.uint64)

    t_ref, blocks_ref = _time(lambda: reference.philox4x64(1234, 0, c0, c1), args.repeat)
    print(f"generator  python   {n / t_ref / 1e6:8.1f} Mblock/s  ({t_ref * 1e3:.1f} ms)")
    if _core is not None:
        t_c, blocks_c = _time(lambda: _core.philox4x64(1234, 0, c0, c1), args.repeat)
        assert np.array_equal(blocks_ref, blocks_c), "backend outputs differ"
        print(f"generator  compiled {n / t_c / 1e6:8.1f} Mblock/s  ({t_c * 1e3:.1f} ms)")
        print(f"generator  speedup  {t_ref / t_c:8.2f}x")

    rng = np.random.default_rng(7)
    x = rng.standard_normal(args.reduce)
    t_ref, s_ref = _time(lambda: reference.pairwise_sum(x), args.repeat)
    print(f"reduction  python   {args.reduce / t_ref / 1e6:8.1f} Melem/s  ({t_ref * 1e3:.1f} ms)")
    if _core is not None:
        t_c, s_c = _time(lambda: _core.pairwise_sum(x), args.repeat)
        assert s_ref == s_c, "backend sums differ"
        print(f"reduction  compiled {args.reduce / t_c / 1e6:8.1f} Melem/s  ({t_c * 1e3:.1f} ms)")
        print(f"reduction  speedup  {t_ref / t_c:8.2f}x")


if __name__ == "__main__":
    main()
