"""Time the numba kernels against the numpy fallback on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both backends are imported directly, so the ``SISOM_DISABLE_NUMBA`` flag
does not matter here. Outputs are checked for bit equality before timing.
"""
import argparse
import json
import time

import numpy as np

from sisom.kernels import numba_impl, numpy_impl


def cases(rng):
    q, s = rng.normal(size=(2000, 96)), rng.normal(size=(3000, 96))
    qc, sc = rng.integers(0, 10, 2000), rng.integers(0, 10, 3000)
    excl = np.full(2000, -1, dtype=np.int64)
    pts = rng.normal(size=(1200, 96))
    unl, lab = rng.normal(size=(4000, 32)), rng.normal(size=(200, 32))
    return {
        "class_min_distances 2000x3000 d=96": lambda m: m.class_min_distances(q, qc, excl, s, sc),
        "greedy_cover n=1200 d=96 budget=120": lambda m: m.greedy_cover(pts, 12.0, 120),
        "kcenter_greedy 4000 unlabeled q=100": lambda m: m.kcenter_greedy(unl, lab, 100),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def same(a, b):
    a, b = (a if isinstance(a, tuple) else (a,)), (b if isinstance(b, tuple) else (b,))
    return all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    if numba_impl is None:
        raise SystemExit("numba is not importable; nothing to compare")
    results = []
    for name, fn in cases(np.random.default_rng(0)).items():
        assert same(fn(numba_impl), fn(numpy_impl)), f"{name}: backends disagree"  # also warms the JIT
        t_nb, t_np = best_of(lambda: fn(numba_impl), args.repeat), best_of(lambda: fn(numpy_impl), args.repeat)
        results.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb})
        print(f"{name:40s} numba {t_nb * 1e3:9.2f} ms  numpy {t_np * 1e3:9.2f} ms  x{t_np / t_nb:6.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
