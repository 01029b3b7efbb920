"""Benchmark the compiled kernel lane against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from permkiss import _kernels_py

try:
    from permkiss import _kernels
except ImportError:
    _kernels = None


def timeit(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, t_py, t_cy):
    speed = f"{t_py / t_cy:6.1f}x" if t_cy else "      -"
    cy = f"{t_cy * 1e3:10.2f}" if t_cy else "         -"
    print(f"{name:<34} {t_py * 1e3:10.2f} {cy} {speed}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()

    if _kernels is None:
        print("compiled extension not available; timing the numpy lane only\n")

    lap_sizes = (200, 500) if args.quick else (200, 500, 1000, 2000)
    seg_entries = 200_000 if args.quick else 1_000_000

    print(f"{'kernel':<34} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")

    rng = np.random.default_rng(0)
    for n in lap_sizes:
        cost = rng.standard_normal((n, n))
        t_py = timeit(_kernels_py.lap_solve, cost, repeats=3)
        t_cy = timeit(_kernels.lap_solve, cost, repeats=3) if _kernels else None
        if _kernels:
            assert abs(_kernels.lap_solve(cost)[1] - _kernels_py.lap_solve(cost)[1]) < 1e-9
        row(f"lap_solve n={n}", t_py, t_cy)

    nseg = seg_entries // 10
    lens = rng.integers(5, 16, size=nseg)
    ptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
    e = int(ptr[-1])
    logits = rng.standard_normal(e) * 10
    t_py = timeit(_kernels_py.segment_softmax, logits, ptr)
    t_cy = timeit(_kernels.segment_softmax, logits, ptr) if _kernels else None
    row(f"segment_softmax E={e}", t_py, t_cy)

    probs = _kernels_py.segment_softmax(logits, ptr)
    gout = rng.standard_normal(e)
    t_py = timeit(_kernels_py.segment_softmax_grad, probs, gout, ptr)
    t_cy = timeit(_kernels.segment_softmax_grad, probs, gout, ptr) if _kernels else None
    row(f"segment_softmax_grad E={e}", t_py, t_cy)

    n, m = 20000, 20
    v = rng.standard_normal((n, m))
    w = rng.standard_normal((n, m))
    rows_idx = rng.integers(n, size=e).astype(np.int64)
    cols_idx = rng.integers(n, size=e).astype(np.int64)
    t_py = timeit(_kernels_py.entry_dots, v, w, rows_idx, cols_idx)
    t_cy = timeit(_kernels.entry_dots, v, w, rows_idx, cols_idx) if _kernels else None
    row(f"entry_dots E={e} m={m}", t_py, t_cy)

    coeff = rng.standard_normal(e)

    def py_scatter():
        out = np.zeros((n, m))
        _kernels_py.scatter_rows_add(out, rows_idx, coeff, w, cols_idx)

    def cy_scatter():
        out = np.zeros((n, m))
        _kernels.scatter_rows_add(out, rows_idx, coeff, w, cols_idx)

    t_py = timeit(py_scatter)
    t_cy = timeit(cy_scatter) if _kernels else None
    row(f"scatter_rows_add E={e} m={m}", t_py, t_cy)


if __name__ == "__main__":
    main()
