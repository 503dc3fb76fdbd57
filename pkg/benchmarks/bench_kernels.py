"""Time the compiled kernels against their NumPy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from prophet_lab import kernels, oracle


def first_exceed_case(trials, n, seed=0):
    rng = np.random.default_rng(seed)
    values, ties = rng.random((trials, n)), rng.random((trials, n))
    thr = np.full(n, 1 - 1 / n)
    return values, ties, thr, np.zeros(n)


def enumeration_case(n, seed=0):
    world = oracle.random_world(np.random.default_rng(seed), n)
    orders = [tuple(int(i) for i in p + 1) for p in (np.arange(n), np.arange(n)[::-1])]
    return world, orders


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled kernels are not built; run `pip install --no-build-isolation -e .` first")

    rows = []
    for trials, n in ((100_000, 10), (20_000, 100)):
        case = first_exceed_case(trials, n)
        t = {b: best_of(lambda b=b: kernels.first_exceed(*case, backend=b), args.repeat) for b in ("python", "cython")}
        rows.append((f"first_exceed {trials}x{n}", t["python"], t["cython"]))
    for n in (12, 16, 20):
        world, orders = enumeration_case(n)
        t = {b: best_of(lambda b=b: oracle.enumerate_orders(world, orders, backend=b), args.repeat)
             for b in ("python", "cython")}
        rows.append((f"enumerate 2^{n} masks x2 orders", t["python"], t["cython"]))

    print(f"{'kernel':34s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, py, cy in rows:
        print(f"{name:34s} {py:11.4f} {cy:11.4f} {py / cy:8.1f}")


if __name__ == "__main__":
    main()
