#!/usr/bin/env python3
"""Benchmark the numba tree kernels against the pure-numpy fallback.

Both backends consume identical random streams and must produce identical
trees; this script asserts that on every case while timing grow and apply.
Run directly:

    python benchmarks/bench_trees.py --trees 20
"""

import argparse
import time

import numpy as np

from pipeforge.learners import _tree_numba, _tree_numpy


def make_case(rng, n, d, ert, k=None):
    X = np.ascontiguousarray(rng.random((n, d)))
    y = np.clip(0.6 * X[:, 0] + 0.4 * rng.random(n), 0.0, 1.0)
    idx0 = rng.integers(0, n, n).astype(np.int64)
    k = k or d
    per = (k if k < d else 0) + (min(k, d) if ert else 0)
    rand = rng.random((2 * n + 1) * per) if per else np.empty(0)
    return X, y, idx0, k, rand


def bench_backend(impl, X, y, idx0, k, ert, rand, n_trees, X_test):
    grown = None
    start = time.perf_counter()
    for _ in range(n_trees):
        grown = impl.grow_tree(X, y, idx0, 12, 2, k, ert, False, rand)
    grow_s = (time.perf_counter() - start) / n_trees

    start = time.perf_counter()
    for _ in range(n_trees):
        out = impl.apply_tree(grown[0], grown[1], grown[2], grown[3], grown[4], X_test)
    apply_s = (time.perf_counter() - start) / n_trees
    return grown, out, grow_s, apply_s


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trees", type=int, default=20, help="repetitions per case")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cases = [
        (200, 13, False),
        (200, 13, True),
        (1000, 34, False),
        (1000, 34, True),
        (3000, 51, False),
        (3000, 51, True),
    ]

    rng = np.random.default_rng(args.seed)
    # trigger numba compilation outside the timed region
    warm = make_case(rng, 50, 4, True)
    _tree_numba.grow_tree(warm[0], warm[1], warm[2], 12, 2, warm[3], True, False, warm[4])
    _tree_numba.apply_tree(
        *(_tree_numba.grow_tree(warm[0], warm[1], warm[2], 12, 2, warm[3], True, False, warm[4])[:5]),
        warm[0],
    )

    header = f"{'case':>16} {'grow numba':>12} {'grow numpy':>12} {'speedup':>8} {'apply numba':>12} {'apply numpy':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n, d, ert in cases:
        X, y, idx0, k, rand = make_case(rng, n, d, ert)
        X_test = np.ascontiguousarray(rng.random((n, d)))
        grown_nb, out_nb, grow_nb, apply_nb = bench_backend(
            _tree_numba, X, y, idx0, k, ert, rand, args.trees, X_test
        )
        grown_np, out_np, grow_np, apply_np = bench_backend(
            _tree_numpy, X, y, idx0, k, ert, rand, max(1, args.trees // 4), X_test
        )
        for a, b in zip(grown_nb, grown_np):
            assert np.array_equal(a, b), "backends disagree on tree structure"
        assert np.array_equal(out_nb, out_np), "backends disagree on predictions"
        label = f"n={n} d={d} {'ert' if ert else 'exact'}"
        print(
            f"{label:>16} {grow_nb * 1e3:>10.2f}ms {grow_np * 1e3:>10.2f}ms "
            f"{grow_np / grow_nb:>7.1f}x {apply_nb * 1e6:>10.1f}us "
            f"{apply_np * 1e6:>10.1f}us {apply_np / apply_nb:>7.1f}x"
        )
    print("\nall cases: identical trees and predictions across backends")


if __name__ == "__main__":
    main()
