"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from htlearn import _kernels_py

try:
    from htlearn import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    w = np.exp(rng.normal(0.0, 1.0, 3000))
    X = rng.normal(size=(1100, 10))
    y = np.where(rng.random(1100) < 0.5, 1.0, -1.0)
    sw = rng.uniform(1.0, 100.0, 1100)
    Z = rng.normal(size=(400, 12))
    ys = np.sign(Z[:, 0] + 0.3 * rng.normal(size=400))
    K = Z @ Z.T
    C = np.full(400, 1.0)
    return {
        "inclusion_dp N=3000 n=700": lambda k: k.inclusion_dp(w, 700),
        "split_scores 1100x10": lambda k: k.split_scores(X, y, sw, 1.0),
        "smo_solve n=400": lambda k: k.smo_solve(K, ys, C),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, run in cases(rng).items():
        tp = _time(lambda: run(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<28}{tp:>12.4f}{'n/a':>12}{'':>10}")
            continue
        tc = _time(lambda: run(_kernels), args.repeat)
        print(f"{name:<28}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
