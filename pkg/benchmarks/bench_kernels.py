"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--sizes 1000 100000 1000000] [--repeat 5]

Each kernel is called once before timing so JIT compilation is excluded.
Results agree to ~1e-15 relative; the script asserts it before printing.
"""

import argparse
import time

import numpy as np

from nmlcomp import kernels


def best_of(fn, arg, repeat):
    fn(arg)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(arg)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 100_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':<18}{'size':>10}{'numba [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}")
    for n in args.sizes:
        v = rng.standard_normal(n) * 10.0 ** rng.integers(-8, 8, n)
        np.testing.assert_allclose(kernels.compensated_sum_numba(v), kernels.compensated_sum_numpy(v),
                                   rtol=1e-14, atol=1e-300)
        tn = best_of(kernels.compensated_sum_numba, v, args.repeat)
        tp = best_of(kernels.compensated_sum_numpy, v, args.repeat)
        print(f"{'compensated_sum':<18}{n:>10}{tn * 1e3:>14.3f}{tp * 1e3:>14.3f}{tp / tn:>10.1f}")

    for n in args.sizes:
        for K, D in ((1, 2), (2, 5)):
            J = rng.uniform(-10, 10, (n, K, D))
            np.testing.assert_allclose(kernels.row_volumes_numba(J), kernels.row_volumes_numpy(J),
                                       rtol=1e-10)
            tn = best_of(kernels.row_volumes_numba, J, args.repeat)
            tp = best_of(kernels.row_volumes_numpy, J, args.repeat)
            label = f"row_volumes {K}x{D}"
            print(f"{label:<18}{n:>10}{tn * 1e3:>14.3f}{tp * 1e3:>14.3f}{tp / tn:>10.1f}")


if __name__ == "__main__":
    main()
