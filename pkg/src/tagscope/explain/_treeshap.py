"""Exact path-dependent TreeSHAP over a flattened forest.

The recursion is unrolled into an explicit stack; path state for tree level
``l`` lives in row ``l`` of the path buffers so a node's children can copy
their parent's (already unwound) path without allocation.
"""

import numpy as np

from .._accel import USE_NUMBA, njit


@njit
def _extend(pd, pz, po, pw, ud, zero, one, idx):
    pd[ud] = idx
    pz[ud] = zero
    po[ud] = one
    pw[ud] = 1.0 if ud == 0 else 0.0
    for i in range(ud - 1, -1, -1):
        pw[i + 1] += one * pw[i] * (i + 1) / (ud + 1)
        pw[i] = zero * pw[i] * (ud - i) / (ud + 1)


@njit
def _unwind(pd, pz, po, pw, ud, k):
    one = po[k]
    zero = pz[k]
    n = pw[ud]
    if one != 0.0:
        for j in range(ud - 1, -1, -1):
            tmp = pw[j]
            pw[j] = n * (ud + 1) / ((j + 1) * one)
            n = tmp - pw[j] * zero * (ud - j) / (ud + 1)
    else:
        for j in range(ud - 1, -1, -1):
            pw[j] = pw[j] * (ud + 1) / (zero * (ud - j))
    for j in range(k, ud):
        pd[j] = pd[j + 1]
        pz[j] = pz[j + 1]
        po[j] = po[j + 1]


@njit
def _unwound_sum(pz, po, pw, ud, k):
    one = po[k]
    zero = pz[k]
    n = pw[ud]
    total = 0.0
    if one != 0.0:
        for j in range(ud - 1, -1, -1):
            tmp = n * (ud + 1) / ((j + 1) * one)
            total += tmp
            n = pw[j] - tmp * zero * (ud - j) / (ud + 1)
    else:
        for j in range(ud - 1, -1, -1):
            total += pw[j] / (zero * (ud - j) / (ud + 1))
    return total


def _tree_shap_py(x, feature, threshold, left, right, value, cover, root, max_depth, phi):
    levels = max_depth + 2
    width = max_depth + 3
    PD = np.zeros((levels, width), dtype=np.int64)
    PZ = np.zeros((levels, width))
    PO = np.zeros((levels, width))
    PW = np.zeros((levels, width))
    cap = 2 * levels + 2
    s_node = np.zeros(cap, dtype=np.int64)
    s_lvl = np.zeros(cap, dtype=np.int64)
    s_ud = np.zeros(cap, dtype=np.int64)
    s_pz = np.zeros(cap)
    s_po = np.zeros(cap)
    s_pi = np.zeros(cap, dtype=np.int64)
    top = 0
    s_node[0] = root
    s_lvl[0] = 0
    s_ud[0] = 0
    s_pz[0] = 1.0
    s_po[0] = 1.0
    s_pi[0] = -1
    top = 1
    while top > 0:
        top -= 1
        j = s_node[top]
        lvl = s_lvl[top]
        ud = s_ud[top]
        pd, pz, po, pw = PD[lvl], PZ[lvl], PO[lvl], PW[lvl]
        if lvl > 0:
            for i in range(ud):
                pd[i] = PD[lvl - 1, i]
                pz[i] = PZ[lvl - 1, i]
                po[i] = PO[lvl - 1, i]
                pw[i] = PW[lvl - 1, i]
        _extend(pd, pz, po, pw, ud, s_pz[top], s_po[top], s_pi[top])
        f = feature[j]
        if f < 0:
            for i in range(1, ud + 1):
                w = _unwound_sum(pz, po, pw, ud, i)
                phi[pd[i]] += w * (po[i] - pz[i]) * value[j]
            continue
        if x[f] < threshold[j]:
            hot, cold = left[j], right[j]
        else:
            hot, cold = right[j], left[j]
        iz = 1.0
        io = 1.0
        nud = ud
        for k in range(1, ud + 1):
            if pd[k] == f:
                iz = pz[k]
                io = po[k]
                _unwind(pd, pz, po, pw, ud, k)
                nud = ud - 1
                break
        s_node[top] = cold
        s_lvl[top] = lvl + 1
        s_ud[top] = nud + 1
        s_pz[top] = iz * cover[cold] / cover[j]
        s_po[top] = 0.0
        s_pi[top] = f
        top += 1
        s_node[top] = hot
        s_lvl[top] = lvl + 1
        s_ud[top] = nud + 1
        s_pz[top] = iz * cover[hot] / cover[j]
        s_po[top] = io
        s_pi[top] = f
        top += 1


def _forest_shap_py(X, feature, threshold, left, right, value, cover, roots, max_depth):
    n, d = X.shape
    out = np.zeros((n, d))
    for i in range(n):
        for t in range(roots.shape[0]):
            _tree_shap_py(X[i], feature, threshold, left, right, value, cover, roots[t], max_depth, out[i])
    return out


if USE_NUMBA:
    _tree_shap_jit = njit(_tree_shap_py)

    @njit(nogil=True)
    def forest_shap_numba(X, feature, threshold, left, right, value, cover, roots, max_depth):
        n, d = X.shape
        out = np.zeros((n, d))
        for i in range(n):
            for t in range(roots.shape[0]):
                _tree_shap_jit(X[i], feature, threshold, left, right, value, cover, roots[t], max_depth, out[i])
        return out

    forest_shap = forest_shap_numba
else:
    forest_shap_numba = None
    forest_shap = _forest_shap_py

forest_shap_python = _forest_shap_py
