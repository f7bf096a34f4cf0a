# Compiled kernels for tree growing and prediction.
#
# Layout: each feature keeps a presorted row order; a node owns the slice
# [start, end) of every per-feature order, and splitting stably partitions
# all of them, so sorting happens once per tree.
import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def expand_order(order, counts):
    # Sorted order of a resample that holds counts[i] copies of row i, with
    # the copies of row i stored at consecutive positions (rows grouped by i).
    p, n = order.shape
    first = np.empty(n, np.int64)
    total = 0
    for i in range(n):
        first[i] = total
        total += counts[i]
    out = np.empty((p, total), np.int64)
    for f in range(p):
        k = 0
        for j in range(n):
            i = order[f, j]
            for c in range(counts[i]):
                out[f, k] = first[i] + c
                k += 1
    return out


@njit(cache=True)
def grow(XT, y, order, mtry, min_node_size, max_depth, seed):
    # XT is the feature-major (p, n) design; order[f] sorts XT[f] and is
    # overwritten while growing.
    p, n = XT.shape
    np.random.seed(seed)

    cap = 2 * n
    feature = np.full(cap, LEAF, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, np.int64)
    right = np.full(cap, LEAF, np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, np.int64)

    perm = np.arange(p)
    eligible = np.empty(mtry, np.int64)
    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(n, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start

        s = 0.0
        sumsq = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(start, end):
            v = y[order[0, i]]
            s += v
            sumsq += v * v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = s / m
        count[node] = m

        if m < 2 * min_node_size or ymin == ymax:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        if mtry < p:
            for k in range(mtry):
                j = k + np.random.randint(0, p - k)
                tmp = perm[k]
                perm[k] = perm[j]
                perm[j] = tmp
            eligible[:] = np.sort(perm[:mtry])
        else:
            for k in range(p):
                eligible[k] = k

        # scores within rounding noise of the running sums count as ties,
        # which keeps the lowest (feature, threshold); this also rejects
        # gains that are pure rounding
        tol = 1e-12 * sumsq
        best_score = s * s / m
        best_f = -1
        best_thr = 0.0
        for k in range(mtry):
            f = eligible[k]
            sl = 0.0
            lo = start + min_node_size - 1
            hi = end - min_node_size
            for i in range(start, lo):
                sl += y[order[f, i]]
            xn = XT[f, order[f, lo]]
            for i in range(lo, hi):
                xi = xn
                sl += y[order[f, i]]
                xn = XT[f, order[f, i + 1]]
                if xi < xn:
                    nl = i - start + 1
                    nr = m - nl
                    sr = s - sl
                    score = sl * sl / nl + sr * sr / nr
                    if score > best_score + tol:
                        best_score = score
                        best_f = f
                        mid = 0.5 * (xi + xn)
                        best_thr = mid if mid < xn else xi

        if best_f < 0:
            continue

        nl_total = 0
        for i in range(start, end):
            idx = order[best_f, i]
            gl = XT[best_f, idx] <= best_thr
            goes_left[idx] = gl
            if gl:
                nl_total += 1
        for f in range(p):
            a = start
            b = 0
            for i in range(start, end):
                idx = order[f, i]
                if goes_left[idx]:
                    order[f, a] = idx
                    a += 1
                else:
                    buf[b] = idx
                    b += 1
            for i in range(b):
                order[f, a + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        mid_pos = start + nl_total
        # right pushed first so the left subtree is expanded first
        st_node[top] = rc
        st_start[top] = mid_pos
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_start[top] = start
        st_end[top] = mid_pos
        st_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@njit(cache=True)
def apply(feature, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def predict(feature, threshold, left, right, value, X):
    leaves = apply(feature, threshold, left, right, X)
    out = np.empty(leaves.shape[0])
    for i in range(leaves.shape[0]):
        out[i] = value[leaves[i]]
    return out
