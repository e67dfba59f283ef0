"""Compare the compiled hot kernels against the numpy fallback.

Runs both backends on identical inputs and reports wall times plus the
speedup ratio.  Invoke from the repository root:

    python3 benchmarks/bench_kernels.py --triangles 200000 --points 20000

The compiled backend must be importable for a meaningful comparison;
otherwise both columns measure the fallback.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from manifold_splines._kernels import BACKEND, fallback

try:
    from manifold_splines._kernels import _speedups as compiled
except ImportError:  # extension not built
    compiled = None


def _time(fn, *args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _row(name, base, fast):
    ratio = base / fast if fast > 0 else float("nan")
    print(f"{name:<18} {base * 1e3:>10.2f} ms {fast * 1e3:>10.2f} ms {ratio:>7.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--triangles", type=int, default=200_000)
    parser.add_argument("--points", type=int, default=20_000)
    parser.add_argument("--degree", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    coords = rng.normal(size=(args.triangles, 3, 2))
    x = rng.uniform(-1.0, 1.0, size=args.points)
    weights = 1.0 / (np.arange(1, args.degree + 1, dtype=np.float64) ** 2)

    print(f"active backend: {BACKEND}")
    if compiled is None:
        print("compiled extension unavailable; timing the fallback twice")
    fast = compiled if compiled is not None else fallback

    # correctness spot checks before timing anything
    a0, s0 = fallback.element_arrays(coords)
    a1, s1 = fast.element_arrays(coords)
    np.testing.assert_allclose(a1, a0, rtol=1e-12)
    np.testing.assert_allclose(s1, s0, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(
        fast.legendre_sum(x, weights),
        fallback.legendre_sum(x, weights),
        rtol=1e-10,
        atol=1e-12,
    )

    print(f"{'kernel':<18} {'numpy':>13} {'compiled':>13} {'speedup':>8}")
    _row(
        f"element_arrays",
        _time(fallback.element_arrays, coords, repeats=args.repeats),
        _time(fast.element_arrays, coords, repeats=args.repeats),
    )
    _row(
        f"legendre_sum",
        _time(fallback.legendre_sum, x, weights, repeats=args.repeats),
        _time(fast.legendre_sum, x, weights, repeats=args.repeats),
    )


if __name__ == "__main__":
    main()
