"""Numba kernels for growing and applying regression/classification trees.

Semantics contract (shared with _tree_numpy, which must stay in lockstep):

* nodes are processed in preorder off an explicit LIFO stack (right child
  pushed before left), node ids assigned in creation order;
* all floating-point accumulations run in index order so results are
  bit-identical to the numpy fallback's np.cumsum;
* candidate features come from a partial Fisher-Yates shuffle driven by
  the pre-drawn uniform stream `rand`; extremely-randomized splits draw
  one extra uniform per candidate, consumed whether or not the candidate
  turns out to be constant;
* exact splits consider midpoints between consecutive distinct sorted
  values (stable sort), skipping midpoints that round up to the right
  neighbour, so the evaluated partition always equals the realized one;
* the best split is the first strict maximum of the gain in candidate
  order; zero-gain splits are legal (a constant feature still never
  splits because it has no candidate threshold).
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def grow_tree(X, y, idx0, max_depth, min_leaf, k, ert, gini, rand):
    n = idx0.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1

    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap, np.float64)
    impurity = np.zeros(cap, np.float64)
    n_node = np.zeros(cap, np.int64)

    idx = idx0.copy()
    tmp = np.empty(n, np.int64)
    perm = np.empty(d, np.int64)
    stack = np.empty((cap, 4), np.int64)

    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    cursor = 0

    while top > 0:
        top -= 1
        nid = stack[top, 0]
        s = stack[top, 1]
        e = stack[top, 2]
        depth = stack[top, 3]
        m = e - s
        mf = float(m)

        yn = np.empty(m, np.float64)
        for i in range(m):
            yn[i] = y[idx[s + i]]
        sum_y = 0.0
        sum_y2 = 0.0
        for i in range(m):
            yv = yn[i]
            sum_y += yv
            sum_y2 += yv * yv
        mean = sum_y / mf
        if gini:
            imp = 2.0 * mean * (1.0 - mean)
        else:
            imp = sum_y2 / mf - mean * mean
        if imp < 0.0:
            imp = 0.0
        value[nid] = mean
        impurity[nid] = imp
        n_node[nid] = m

        if depth >= max_depth or m < 2 * min_leaf or imp <= 0.0:
            continue

        for i in range(d):
            perm[i] = i
        if k < d:
            for i in range(k):
                u = rand[cursor]
                cursor += 1
                j = i + int(u * float(d - i))
                if j > d - 1:
                    j = d - 1
                t = perm[i]
                perm[i] = perm[j]
                perm[j] = t
        n_cand = k if k < d else d

        best_gain = -np.inf
        best_feat = -1
        best_thr = 0.0

        vbuf = np.empty(m, np.float64)
        for ci in range(n_cand):
            c = perm[ci]
            for i in range(m):
                vbuf[i] = X[idx[s + i], c]
            if ert:
                u = rand[cursor]
                cursor += 1
                mn = vbuf[0]
                mx = vbuf[0]
                for i in range(1, m):
                    if vbuf[i] < mn:
                        mn = vbuf[i]
                    if vbuf[i] > mx:
                        mx = vbuf[i]
                if mn == mx:
                    continue
                thr = mn + u * (mx - mn)
                nl = 0
                sl = 0.0
                sl2 = 0.0
                for i in range(m):
                    if vbuf[i] <= thr:
                        nl += 1
                        yv = yn[i]
                        sl += yv
                        sl2 += yv * yv
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                nlf = float(nl)
                nrf = mf - nlf
                mean_l = sl / nlf
                mean_r = (sum_y - sl) / nrf
                if gini:
                    il = 2.0 * mean_l * (1.0 - mean_l)
                    ir = 2.0 * mean_r * (1.0 - mean_r)
                else:
                    il = sl2 / nlf - mean_l * mean_l
                    if il < 0.0:
                        il = 0.0
                    ir = (sum_y2 - sl2) / nrf - mean_r * mean_r
                    if ir < 0.0:
                        ir = 0.0
                g = imp - (nlf / mf) * il - (nrf / mf) * ir
                if g > best_gain:
                    best_gain = g
                    best_feat = c
                    best_thr = thr
            else:
                order = np.argsort(vbuf, kind="mergesort")
                ps = 0.0
                ps2 = 0.0
                for pos in range(m - 1):
                    o = order[pos]
                    yv = yn[o]
                    ps += yv
                    ps2 += yv * yv
                    a = vbuf[o]
                    b = vbuf[order[pos + 1]]
                    if a == b:
                        continue
                    thr = 0.5 * (a + b)
                    if not (thr < b):
                        continue
                    nl = pos + 1
                    if nl < min_leaf or m - nl < min_leaf:
                        continue
                    nlf = float(nl)
                    nrf = mf - nlf
                    mean_l = ps / nlf
                    mean_r = (sum_y - ps) / nrf
                    if gini:
                        il = 2.0 * mean_l * (1.0 - mean_l)
                        ir = 2.0 * mean_r * (1.0 - mean_r)
                    else:
                        il = ps2 / nlf - mean_l * mean_l
                        if il < 0.0:
                            il = 0.0
                        ir = (sum_y2 - ps2) / nrf - mean_r * mean_r
                        if ir < 0.0:
                            ir = 0.0
                    g = imp - (nlf / mf) * il - (nrf / mf) * ir
                    if g > best_gain:
                        best_gain = g
                        best_feat = c
                        best_thr = thr

        if best_feat < 0:
            continue

        nl = 0
        for i in range(m):
            if X[idx[s + i], best_feat] <= best_thr:
                tmp[nl] = idx[s + i]
                nl += 1
        pos_r = nl
        for i in range(m):
            if not (X[idx[s + i], best_feat] <= best_thr):
                tmp[pos_r] = idx[s + i]
                pos_r += 1
        for i in range(m):
            idx[s + i] = tmp[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[nid] = best_feat
        threshold[nid] = best_thr
        left[nid] = lid
        right[nid] = rid
        stack[top, 0] = rid
        stack[top, 1] = s + nl
        stack[top, 2] = e
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = s
        stack[top, 2] = s + nl
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        impurity[:n_nodes].copy(),
        n_node[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, value, X):
    nrows = X.shape[0]
    out = np.empty(nrows, np.float64)
    for r in range(nrows):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out
