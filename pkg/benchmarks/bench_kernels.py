"""Time the compiled and numpy KDE kernels on the same inputs.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--out bench.json]

Prints one line per (n, queries, dim) case with the best-of-``repeat``
wall time of each backend and the speed-up.
"""

import argparse
import json
import platform
import time

import numpy as np

from densityridge import _backend
from densityridge._backend import python_kde_eval

CASES = [(500, 500, 2), (2000, 500, 3), (2000, 2000, 3), (5000, 1000, 3)]


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--out", default=None, help="optional JSON file for the results")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    rows = []
    print(f"compiled backend available: {_backend.BACKEND == 'cython'}")
    print(f"{'n':>6} {'queries':>8} {'dim':>4} {'numpy s':>10} {'cython s':>10} {'speed-up':>9}")
    for n, m, dim in CASES:
        data = rng.normal(size=(n, dim))
        q = rng.normal(size=(m, dim))
        t_py = best_time(lambda: python_kde_eval(data, 0.5, q, 2), args.repeat)
        if _backend.BACKEND == "cython":
            t_c = best_time(lambda: _backend.kde_eval(data, 0.5, q, 2), args.repeat)
        else:
            t_c = float("nan")
        rows.append({"n": n, "queries": m, "dim": dim, "numpy": t_py, "cython": t_c})
        print(f"{n:>6} {m:>8} {dim:>4} {t_py:>10.4f} {t_c:>10.4f} {t_py / t_c:>9.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"machine": platform.machine(), "python": platform.python_version(), "cases": rows}, fh,
                      indent=2)


if __name__ == "__main__":
    main()
