"""Compare the numba kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 10x10,50x100,100x100]

Prints the best wall time per call for each kernel and panel size, plus the
largest absolute difference between the two paths.
"""
import argparse
import time

import numpy as np

from panel_epa import _hot
from panel_epa._jit import HAVE_NUMBA


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="10x10,50x100,100x100,100x400")
    ap.add_argument("--bandwidth", type=int, default=4, help="time bandwidth l_T")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    lt = args.bandwidth
    w = np.maximum(0.0, 1.0 - np.arange(lt + 1) / (lt + 1))
    print(f"{'kernel':<12}{'n x T':>10}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}{'max diff':>11}")
    for size in args.sizes.split(","):
        n, T = (int(v) for v in size.lower().split("x"))
        x = rng.standard_normal((n, T))
        x -= x.mean(axis=1, keepdims=True)
        pairs = {
            "lrcov": (_hot.lrcov_matrix_np, _hot.lrcov_matrix_nb, (x, w)),
            "lrv_rows": (_hot.lrv_rows_np, _hot.lrv_rows_nb, (x, w)),
            "corr_sq": (_hot.corr_sq_sum_np, _hot.corr_sq_sum_nb, (x,)),
        }
        for name, (f_np, f_nb, a) in pairs.items():
            f_nb(*a)  # compile outside the timing
            t_np = best_time(lambda: f_np(*a), args.repeat)
            t_nb = best_time(lambda: f_nb(*a), args.repeat)
            diff = float(np.max(np.abs(np.asarray(f_np(*a)) - np.asarray(f_nb(*a)))))
            print(f"{name:<12}{size:>10}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}"
                  f"{t_np / t_nb:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
