"""Time the jit kernels against the plain-numpy fallback.

Runs each hot kernel on representative problem sizes and prints a table of
median wall times plus the speedup ratio. The jit backend pays a one-time
compilation cost, so each kernel is warmed up before timing.

Usage: python3 benchmarks/bench_kernels.py [--n 20000] [--repeats 30]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from mixipw import _kernels_numpy as knp

try:
    from mixipw import _kernels_numba as knb
except ImportError:
    knb = None


def make_cases(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    k, d = 3, 11
    x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    w_soft = rng.dirichlet(np.ones(k), size=n)
    coef = np.vstack([np.zeros(d), rng.standard_normal((k - 1, d))])
    gate = rng.standard_normal((n, k)) * 2.0
    mu = rng.standard_normal((n, k))
    y = rng.standard_normal(n)
    sigma2 = rng.uniform(0.2, 3.0, k)
    w_flat = rng.uniform(0.0, 1.0, n)
    beta = rng.standard_normal(d)
    return {
        "mixture_stats": (gate, mu, y, sigma2),
        "softlogit_value": (x, w_soft, coef, 1e-8),
        "softlogit_stats": (x, w_soft, coef, 1e-8),
        "wls_moments": (x, w_flat, y),
        "weighted_rss": (x, w_flat, y, beta),
    }


def median_time(fn, args, repeats: int) -> float:
    fn(*args)  # warm-up (jit compilation / cache effects)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20000, help="rows per problem (default 20000)")
    parser.add_argument("--repeats", type=int, default=30, help="timed repetitions (default 30)")
    args = parser.parse_args()

    cases = make_cases(args.n)
    print(f"n = {args.n}, repeats = {args.repeats} (median wall time)")
    header = f"{'kernel':<18}{'numpy':>12}{'numba':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, payload in cases.items():
        t_np = median_time(getattr(knp, name), payload, args.repeats)
        if knb is None:
            print(f"{name:<18}{t_np * 1e3:>10.3f}ms{'n/a':>12}{'n/a':>10}")
            continue
        t_nb = median_time(getattr(knb, name), payload, args.repeats)
        print(f"{name:<18}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms{t_np / t_nb:>9.2f}x")


if __name__ == "__main__":
    main()
