"""Hot loops for tree growth and forest evaluation.

Each kernel has a numba form and a numpy form. The public names at the bottom
pick one according to ``tagscope._accel.USE_NUMBA``; the benchmark and the
parity tests import both explicitly. The two split scans visit candidates in
the same order (features ascending, thresholds ascending) and evaluate the gain
with the same floating-point expression, so they pick identical splits.
"""

import numpy as np

from .._accel import USE_NUMBA, njit


@njit
def split_gain(GL, HL, GR, HR, lam, gamma):
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - (GL + GR) * (GL + GR) / (HL + HR + lam)) - gamma


@njit
def midpoint(a, b):
    t = 0.5 * (a + b)
    if not t > a:
        t = b
    return t


def _split_scan_py(sorted_x, sorted_idx, node_of_row, g, h, G, H, features, lam, gamma, min_child_weight):
    """Best split per frontier node.

    ``sorted_idx[f]`` lists training rows by ascending feature f and
    ``sorted_x[f]`` holds the matching values, so the inner loop reads
    feature values sequentially. Rows with ``node_of_row < 0`` are skipped.
    """
    n_nodes = G.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    GL = np.zeros(n_nodes)
    HL = np.zeros(n_nodes)
    last = np.zeros(n_nodes)
    seen = np.zeros(n_nodes, dtype=np.bool_)
    for fi in range(features.shape[0]):
        f = features[fi]
        GL[:] = 0.0
        HL[:] = 0.0
        seen[:] = False
        order = sorted_idx[f]
        vals = sorted_x[f]
        for ii in range(order.shape[0]):
            r = order[ii]
            k = node_of_row[r]
            if k < 0:
                continue
            x = vals[ii]
            if seen[k] and x != last[k]:
                GR = G[k] - GL[k]
                HR = H[k] - HL[k]
                if HL[k] >= min_child_weight and HR >= min_child_weight:
                    gain = split_gain(GL[k], HL[k], GR, HR, lam, gamma)
                    if gain > best_gain[k]:
                        best_gain[k] = gain
                        best_feat[k] = f
                        best_thr[k] = midpoint(last[k], x)
            GL[k] += g[r]
            HL[k] += h[r]
            last[k] = x
            seen[k] = True
    return best_gain, best_feat, best_thr


split_scan_numba = njit(nogil=True)(_split_scan_py) if USE_NUMBA else None


def split_scan_numpy(sorted_x, sorted_idx, node_of_row, g, h, G, H, features, lam, gamma, min_child_weight):
    """Vectorised scan: per-node running sums via sequential cumsum."""
    n_nodes = G.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    for f in features:
        pos = np.flatnonzero(node_of_row[sorted_idx[f]] >= 0)
        order = sorted_idx[f][pos]
        vals = sorted_x[f][pos]
        nodes = node_of_row[order]
        by_node = np.argsort(nodes, kind="stable")
        grouped = order[by_node]
        grouped_x = vals[by_node]
        bounds = np.searchsorted(np.sort(nodes, kind="stable"), np.arange(n_nodes + 1))
        for k in range(n_nodes):
            rows = grouped[bounds[k] : bounds[k + 1]]
            if rows.shape[0] < 2:
                continue
            x = grouped_x[bounds[k] : bounds[k + 1]]
            cg = np.cumsum(g[rows])[:-1]
            ch = np.cumsum(h[rows])[:-1]
            cand = np.flatnonzero(x[1:] != x[:-1])
            if cand.shape[0] == 0:
                continue
            GLc, HLc = cg[cand], ch[cand]
            GR = G[k] - GLc
            HR = H[k] - HLc
            gain = 0.5 * (GLc * GLc / (HLc + lam) + GR * GR / (HR + lam) - (GLc + GR) * (GLc + GR) / (HLc + HR + lam)) - gamma
            gain = np.where((HLc >= min_child_weight) & (HR >= min_child_weight), gain, -np.inf)
            i = int(np.argmax(gain))
            if gain[i] > best_gain[k]:
                best_gain[k] = gain[i]
                best_feat[k] = f
                best_thr[k] = midpoint(x[cand[i]], x[cand[i] + 1])
    return best_gain, best_feat, best_thr


def _predict_forest_py(X, feature, threshold, left, right, value, roots, base):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = base
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            s += value[node]
        out[i] = s
    return out


predict_forest_numba = njit(nogil=True)(_predict_forest_py) if USE_NUMBA else None


def predict_forest_numpy(X, feature, threshold, left, right, value, roots, base):
    """Route all rows level by level through each tree."""
    out = np.full(X.shape[0], base, dtype=np.float64)
    rows = np.arange(X.shape[0])
    for root in roots:
        node = np.full(X.shape[0], root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            idx = rows[active]
            nd = node[idx]
            go_left = X[idx, feature[nd]] < threshold[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        out += value[node]
    return out


split_scan = split_scan_numba if USE_NUMBA else split_scan_numpy
predict_forest = predict_forest_numba if USE_NUMBA else predict_forest_numpy
