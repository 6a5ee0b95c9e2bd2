"""Pure-numpy fallback for the tree kernels.

Mirrors _tree_numba node for node: same stack discipline, same random
stream consumption, same accumulation order (np.cumsum is a sequential
prefix sum, so sums match the compiled loops bit for bit). Kept
vectorized per node so the fallback stays usable, just slower.
"""

import numpy as np


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
    stack = [(0, 0, n, 0)]
    n_nodes = 1
    cursor = 0

    while stack:
        nid, s, e, depth = stack.pop()
        m = e - s
        mf = float(m)
        idx_node = idx[s:e]
        yn = y[idx_node]
        cps = np.cumsum(yn)
        cps2 = np.cumsum(yn * yn)
        sum_y = float(cps[-1])
        sum_y2 = float(cps2[-1])
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

        perm = np.arange(d, dtype=np.int64)
        if k < d:
            for i in range(k):
                u = float(rand[cursor])
                cursor += 1
                j = i + int(u * float(d - i))
                if j > d - 1:
                    j = d - 1
                perm[i], perm[j] = perm[j], perm[i]
        n_cand = k if k < d else d
        cand = perm[:n_cand]

        V = X[np.ix_(idx_node, cand)]
        best_feat = -1
        best_thr = 0.0
        if ert:
            us = rand[cursor : cursor + n_cand]
            cursor += n_cand
            mn = V.min(axis=0)
            mx = V.max(axis=0)
            thr = mn + us * (mx - mn)
            mask = V <= thr[None, :]
            nl = mask.sum(axis=0)
            sl = np.cumsum(np.where(mask, yn[:, None], 0.0), axis=0)[-1]
            sl2 = np.cumsum(np.where(mask, (yn * yn)[:, None], 0.0), axis=0)[-1]
            valid = (mn != mx) & (nl >= min_leaf) & ((m - nl) >= min_leaf)
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = _gains(imp, mf, nl.astype(np.float64), sl, sl2, sum_y, sum_y2, gini)
            gains = np.where(valid, gains, -np.inf)
            ci = int(np.argmax(gains))
            if gains[ci] > -np.inf:
                best_feat = int(cand[ci])
                best_thr = float(thr[ci])
        else:
            order = np.argsort(V, axis=0, kind="stable")
            vs = np.take_along_axis(V, order, axis=0)
            ys = yn[order]
            cs = np.cumsum(ys, axis=0)
            cs2 = np.cumsum(ys * ys, axis=0)
            a = vs[:-1]
            b = vs[1:]
            thr = 0.5 * (a + b)
            nlf = np.arange(1, m, dtype=np.float64)[:, None]
            valid = (a != b) & (thr < b) & (nlf >= min_leaf) & ((mf - nlf) >= min_leaf)
            gains = _gains(imp, mf, nlf, cs[:-1], cs2[:-1], sum_y, sum_y2, gini)
            gains = np.where(valid, gains, -np.inf)
            flat = gains.T.reshape(-1)
            bi = int(np.argmax(flat))
            if flat[bi] > -np.inf:
                ci, pos = divmod(bi, m - 1)
                best_feat = int(cand[ci])
                best_thr = float(thr[pos, ci])

        if best_feat < 0:
            continue

        mask2 = X[idx_node, best_feat] <= best_thr
        nl_count = int(mask2.sum())
        idx[s:e] = np.concatenate([idx_node[mask2], idx_node[~mask2]])

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[nid] = best_feat
        threshold[nid] = best_thr
        left[nid] = lid
        right[nid] = rid
        stack.append((rid, s + nl_count, e, depth + 1))
        stack.append((lid, s, s + nl_count, depth + 1))

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        impurity[:n_nodes].copy(),
        n_node[:n_nodes].copy(),
    )


def _gains(imp, mf, nlf, sl, sl2, sum_y, sum_y2, gini):
    nrf = mf - nlf
    mean_l = sl / nlf
    mean_r = (sum_y - sl) / nrf
    if gini:
        il = 2.0 * mean_l * (1.0 - mean_l)
        ir = 2.0 * mean_r * (1.0 - mean_r)
    else:
        il = sl2 / nlf - mean_l * mean_l
        il = np.maximum(il, 0.0)
        ir = (sum_y2 - sl2) / nrf - mean_r * mean_r
        ir = np.maximum(ir, 0.0)
    return imp - (nlf / mf) * il - (nrf / mf) * ir


def apply_tree(feature, threshold, left, right, value, X):
    nrows = X.shape[0]
    node = np.zeros(nrows, np.int64)
    while True:
        f = feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            break
        cur = node[active]
        go_left = X[active, feature[cur]] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
    return value[node].astype(np.float64)
