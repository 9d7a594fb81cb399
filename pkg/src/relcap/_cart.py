"""Compiled CART kernels shared by the forest and boosting regressors.

Trees grow on pre-sorted per-feature index arrays; splits maximize variance
reduction via the prefix-sum identity sum_L^2/n_L + sum_R^2/n_R - sum^2/n.
The scan visits features in ascending index order and candidate thresholds
in ascending value order, keeping the first strict maximum, so equal gains
resolve to the lowest feature index and then the lowest threshold.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def grow_tree(X, y, sorted_idx, min_leaf, max_depth):  # pragma: no cover
    n, n_feat = X.shape
    max_nodes = 4 * n + 8
    feat = np.full(max_nodes, -1, np.int64)
    thr = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    val = np.zeros(max_nodes, np.float64)
    stack = np.zeros((max_nodes, 4), np.int64)  # node, start, end, depth
    stack[0] = (0, 0, n, 0)
    top = 1
    n_nodes = 1
    tmp = np.empty(n, np.int64)
    goes_left = np.empty(n, np.bool_)
    while top > 0:
        top -= 1
        node, start, end, depth = stack[top]
        m = end - start
        s = 0.0
        for i in range(start, end):
            s += y[sorted_idx[0, i]]
        val[node] = s / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        best_gain = -1.0
        best_f = -1
        best_pos = -1
        best_thr = 0.0
        parent_score = s * s / m
        for f in range(n_feat):
            sum_l = 0.0
            for i in range(start, end - 1):
                r = sorted_idx[f, i]
                sum_l += y[r]
                n_l = i - start + 1
                if n_l < min_leaf or m - n_l < min_leaf:
                    continue
                xv = X[r, f]
                xn = X[sorted_idx[f, i + 1], f]
                if xn <= xv:
                    continue
                sum_r = s - sum_l
                gain = sum_l * sum_l / n_l + sum_r * sum_r / (m - n_l) - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_pos = n_l
                    best_thr = 0.5 * (xv + xn)
        if best_f < 0 or best_gain <= 1e-12:
            continue
        for i in range(start, end):
            goes_left[sorted_idx[best_f, i]] = i - start < best_pos
        # stable partition of every feature's segment preserves sort order
        for f in range(n_feat):
            a = start
            b = 0
            for i in range(start, end):
                r = sorted_idx[f, i]
                if goes_left[r]:
                    sorted_idx[f, a] = r
                    a += 1
                else:
                    tmp[b] = r
                    b += 1
            sorted_idx[f, a:end] = tmp[:b]
        lid, rid = n_nodes, n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack[top] = (lid, start, start + best_pos, depth + 1)
        top += 1
        stack[top] = (rid, start + best_pos, end, depth + 1)
        top += 1
    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes], val[:n_nodes]


@njit(cache=True, nogil=True)
def apply_tree(feat, thr, left, right, val, X, out, weight):  # pragma: no cover
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += weight * val[node]


def presort(X: np.ndarray) -> np.ndarray:
    """Stable per-feature argsort, shaped (n_features, n_rows)."""
    n, n_feat = X.shape
    out = np.empty((n_feat, n), np.int64)
    for f in range(n_feat):
        out[f] = np.argsort(X[:, f], kind="stable")
    return out


def fit_one_tree(X: np.ndarray, y: np.ndarray, min_leaf: int, max_depth: int):
    """Grow a single tree on all rows/features of (X, y)."""
    return grow_tree(X, y, presort(X), min_leaf, max_depth)
