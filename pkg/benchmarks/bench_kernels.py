"""Time the numba kernels against their numpy/Python fallbacks.

    python benchmarks/bench_kernels.py [--rows 1600] [--repeat 5]

Also checks that both paths return the same answer on the benchmark inputs.
Run with numba enabled (TAGSCOPE_DISABLE_NUMBA unset); the fallbacks are
imported explicitly so both sides are timed in one process.
"""

import argparse
import sys
import timeit

import numpy as np

from tagscope._accel import USE_NUMBA
from tagscope.explain import _treeshap
from tagscope.explain.shap import _flatten as flatten_for_shap
from tagscope.explain.shap import tree_depth
from tagscope.gbdt import Params, _kernels, train
from tagscope.gbdt.model import _flatten as flatten_forest
from tagscope.gbdt.model import _presort


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def row(name, t_fast, t_slow, same):
    print(f"{name:<14} numba {t_fast * 1e3:9.3f} ms   fallback {t_slow * 1e3:9.3f} ms   "
          f"x{t_slow / t_fast:7.1f}   same={same}")


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=1600)
    ap.add_argument("--features", type=int, default=62)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not USE_NUMBA:
        sys.exit("numba is disabled (TAGSCOPE_DISABLE_NUMBA) or missing; nothing to compare")

    rng = np.random.default_rng(args.seed)
    n, d = args.rows, args.features
    X = rng.standard_normal((n, d))
    y = (X[:, 0] + X[:, 1] * X[:, 2] + 0.3 * rng.standard_normal(n) > 0).astype(np.int8)

    # split scan: a depth-3 frontier of 8 nodes
    sorted_idx, sorted_x = _presort(X)
    g = rng.standard_normal(n)
    h = rng.uniform(0.05, 0.25, n)
    node_of_row = rng.integers(0, 8, n).astype(np.int64)
    G = np.bincount(node_of_row, weights=g, minlength=8)
    H = np.bincount(node_of_row, weights=h, minlength=8)
    feats = np.arange(d, dtype=np.int64)
    scan_args = (sorted_x, sorted_idx, node_of_row, g, h, G, H, feats, 1.0, 0.0, 1.0)
    a = _kernels.split_scan_numba(*scan_args)
    b = _kernels.split_scan_numpy(*scan_args)
    same = all(np.array_equal(u, v) for u, v in zip(a, b))
    row("split_scan", best_of(lambda: _kernels.split_scan_numba(*scan_args), args.repeat),
        best_of(lambda: _kernels.split_scan_numpy(*scan_args), args.repeat), same)

    model = train(X, y, Params(n_trees=100, max_depth=6))
    trees = model.boosters[0].trees
    flat = flatten_forest(trees)
    base = model.boosters[0].base_score
    pa = _kernels.predict_forest_numba(X, *flat, base)
    pb = _kernels.predict_forest_numpy(X, *flat, base)
    row("predict", best_of(lambda: _kernels.predict_forest_numba(X, *flat, base), args.repeat),
        best_of(lambda: _kernels.predict_forest_numpy(X, *flat, base), args.repeat), bool(np.array_equal(pa, pb)))

    # TreeSHAP: the Python path is slow, so explain a small batch
    Xs = np.ascontiguousarray(X[:20])
    shap_arrays = flatten_for_shap(trees)
    depth = max(tree_depth(t) for t in trees)
    sa = _treeshap.forest_shap_numba(Xs, *shap_arrays, depth)
    sb = _treeshap.forest_shap_python(Xs, *shap_arrays, depth)
    row("treeshap", best_of(lambda: _treeshap.forest_shap_numba(Xs, *shap_arrays, depth), args.repeat),
        best_of(lambda: _treeshap.forest_shap_python(Xs, *shap_arrays, depth), 1),
        bool(np.allclose(sa, sb, rtol=0, atol=1e-12)))


if __name__ == "__main__":
    main()
