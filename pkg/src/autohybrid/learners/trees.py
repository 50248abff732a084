"""CART regression trees (variance reduction), random forests and gradient
boosting with squared loss.

Trees are grown on presorted index arrays: each node owns a contiguous
segment of every per-feature ordering, and a split stably partitions those
segments, so no node ever re-sorts.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GBM_DEPTH = 3
GBM_SHRINKAGE = 0.1


@njit(cache=True, nogil=True)
def grow_tree(X, y, samples, weights, order0, max_depth, max_features, min_leaf, seed):
    """Grow one tree over the rows ``samples`` with multiplicities ``weights``.

    ``order0[f]`` lists positions into ``samples`` sorted stably by feature f.
    A row drawn k times by a bootstrap enters once with weight k, which is
    equivalent to repeating it when ``min_leaf`` is 1. ``max_depth < 0`` means
    unbounded. Returns node arrays (feature, threshold, left, right, value),
    feature == -1 marking leaves.
    """
    np.random.seed(seed)
    d = X.shape[1]
    m = samples.shape[0]
    order = order0.copy()
    xl = np.empty((d, m))
    yl = np.empty(m)
    for p in range(m):
        yl[p] = y[samples[p]]
        for f in range(d):
            xl[f, p] = X[samples[p], f]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    goes_left = np.zeros(m, np.int64)
    buf = np.empty(m, np.int64)
    feats = np.arange(d)

    # pending nodes with their weight, sum and sum of squares of y
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_sums = np.empty((cap, 3))
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    st_sums[0, 0] = 0.0
    st_sums[0, 1] = 0.0
    st_sums[0, 2] = 0.0
    for p in range(m):
        st_sums[0, 0] += weights[p]
        st_sums[0, 1] += weights[p] * yl[p]
        st_sums[0, 2] += weights[p] * yl[p] * yl[p]
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        cnt = st_sums[top, 0]
        total = st_sums[top, 1]
        total_sq = st_sums[top, 2]
        value[node] = total / cnt
        if end - start < 2 or cnt < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        # no split can gain more than the node's own squared error
        if total_sq - total * total / cnt <= 1e-12 * max(total_sq, 1e-300):
            continue

        parent_proxy = total * total / cnt
        best_proxy = parent_proxy
        best_f = -1
        best_pos = -1
        visited = 0
        drawn = 0
        # draw features without replacement until max_features informative ones
        while drawn < d and visited < max_features:
            r = drawn + np.random.randint(d - drawn)
            tmp = feats[drawn]
            feats[drawn] = feats[r]
            feats[r] = tmp
            f = feats[drawn]
            drawn += 1
            if xl[f, order[f, end - 1]] <= xl[f, order[f, start]]:
                continue
            visited += 1
            left_sum = 0.0
            nl = 0.0
            xb = xl[f, order[f, start]]
            for k in range(start, end - 1):
                p = order[f, k]
                left_sum += weights[p] * yl[p]
                nl += weights[p]
                xa = xb
                xb = xl[f, order[f, k + 1]]
                if xb <= xa:
                    continue
                nr = cnt - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                right_sum = total - left_sum
                proxy = left_sum * left_sum / nl + right_sum * right_sum / nr
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_f = f
                    best_pos = k
        if best_f < 0 or best_proxy - parent_proxy <= 1e-12 * max(total_sq, 1e-300):
            continue

        xa = xl[best_f, order[best_f, best_pos]]
        xb = xl[best_f, order[best_f, best_pos + 1]]
        thr = 0.5 * (xa + xb)
        if thr >= xb or thr < xa:
            thr = xa
        feature[node] = best_f
        threshold[node] = thr
        n_left = best_pos - start + 1
        lw = 0.0
        ls = 0.0
        lq = 0.0
        for k in range(start, end):
            p = order[best_f, k]
            if k <= best_pos:
                goes_left[p] = 1
                lw += weights[p]
                ls += weights[p] * yl[p]
                lq += weights[p] * yl[p] * yl[p]
            else:
                goes_left[p] = 0
        for f in range(d):
            # two-row segments split into two leaves that never read an ordering
            if f == best_f or end - start == 2:
                continue
            a = start
            b = 0
            for k in range(start, end):
                p = order[f, k]
                # branch-free: the left/right pattern is unpredictable
                order[f, a] = p
                buf[b] = p
                g = goes_left[p]
                a += g
                b += 1 - g
            for k in range(b):
                order[f, a + k] = buf[k]

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        st_node[top] = lchild
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        st_sums[top, 0] = lw
        st_sums[top, 1] = ls
        st_sums[top, 2] = lq
        top += 1
        st_node[top] = rchild
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        st_sums[top, 0] = cnt - lw
        st_sums[top, 1] = total - ls
        st_sums[top, 2] = total_sq - lq
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def _predict_one_tree(X, feature, threshold, left, right, value, base, out, weight):
    for r in range(X.shape[0]):
        node = base
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = base + left[node]
            else:
                node = base + right[node]
        out[r] += weight * value[node]


@njit(cache=True, nogil=True)
def predict_ensemble(X, feature, threshold, left, right, value, offsets, weight, init):
    """Sum of ``weight * tree(x)`` over trees stored back to back, plus ``init``."""
    out = np.full(X.shape[0], init)
    for t in range(offsets.shape[0] - 1):
        _predict_one_tree(X, feature, threshold, left, right, value, offsets[t], out, weight)
    return out


@njit(cache=True, nogil=True)
def _gbm(X, y, order0, n_estimators, depth, shrinkage):
    n = X.shape[0]
    cap = 2 ** (depth + 1) - 1
    feature = np.full(n_estimators * cap, -1, np.int64)
    threshold = np.zeros(n_estimators * cap)
    left = np.full(n_estimators * cap, -1, np.int64)
    right = np.full(n_estimators * cap, -1, np.int64)
    value = np.zeros(n_estimators * cap)
    offsets = np.zeros(n_estimators + 1, np.int64)
    samples = np.arange(n)
    weights = np.ones(n)
    init = np.mean(y)
    F = np.full(n, init)
    pos = 0
    for t in range(n_estimators):
        resid = y - F
        fe, th, le, ri, va = grow_tree(X, resid, samples, weights, order0, depth, X.shape[1], 1, t)
        k = fe.shape[0]
        feature[pos : pos + k] = fe
        threshold[pos : pos + k] = th
        left[pos : pos + k] = le
        right[pos : pos + k] = ri
        value[pos : pos + k] = va
        offsets[t] = pos
        _predict_one_tree(X, feature, threshold, left, right, value, pos, F, shrinkage)
        pos += k
        offsets[t + 1] = pos
    return feature[:pos], threshold[:pos], left[:pos], right[:pos], value[:pos], offsets, init


@njit(cache=True, nogil=True)
def _bootstrap_rows(draws, order_all):
    """Distinct rows of a bootstrap draw, their multiplicities, and their
    per-feature orderings taken from the full-data orderings (no re-sort)."""
    d, n = order_all.shape
    count = np.zeros(n, np.int64)
    for k in range(draws.shape[0]):
        count[draws[k]] += 1
    slot = np.full(n, -1, np.int64)
    m = 0
    for r in range(n):
        if count[r] > 0:
            slot[r] = m
            m += 1
    samples = np.empty(m, np.int64)
    weights = np.empty(m)
    for r in range(n):
        if slot[r] >= 0:
            samples[slot[r]] = r
            weights[slot[r]] = count[r]
    order = np.empty((d, m), np.int64)
    for f in range(d):
        a = 0
        for i in range(n):
            s = slot[order_all[f, i]]
            if s >= 0:
                order[f, a] = s
                a += 1
    return samples, weights, order


@njit(cache=True, nogil=True)
def _forest(X, y, boot, seeds, order_all, max_features):
    n_trees, m = boot.shape
    cap = 2 * m + 1
    feature = np.empty(n_trees * cap, np.int64)
    threshold = np.empty(n_trees * cap)
    left = np.empty(n_trees * cap, np.int64)
    right = np.empty(n_trees * cap, np.int64)
    value = np.empty(n_trees * cap)
    offsets = np.zeros(n_trees + 1, np.int64)
    pos = 0
    for t in range(n_trees):
        samples, weights, order0 = _bootstrap_rows(boot[t], order_all)
        fe, th, le, ri, va = grow_tree(X, y, samples, weights, order0, -1, max_features, 1, seeds[t])
        k = fe.shape[0]
        feature[pos : pos + k] = fe
        threshold[pos : pos + k] = th
        left[pos : pos + k] = le
        right[pos : pos + k] = ri
        value[pos : pos + k] = va
        pos += k
        offsets[t + 1] = pos
    return (
        feature[:pos].copy(),
        threshold[:pos].copy(),
        left[:pos].copy(),
        right[:pos].copy(),
        value[:pos].copy(),
        offsets,
    )


def presort(X: np.ndarray) -> np.ndarray:
    """Stable per-feature orderings, shape (d, n)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def _pack(trees) -> dict:
    sizes = [t[0].shape[0] for t in trees]
    offsets = np.zeros(len(trees) + 1, np.int64)
    np.cumsum(sizes, out=offsets[1:])
    return {
        "feature": np.concatenate([t[0] for t in trees]),
        "threshold": np.concatenate([t[1] for t in trees]),
        "left": np.concatenate([t[2] for t in trees]),
        "right": np.concatenate([t[3] for t in trees]),
        "value": np.concatenate([t[4] for t in trees]),
        "offsets": offsets,
    }


def fit_tree(X, y, max_depth=-1, max_features=None, seed=0) -> dict:
    """A single CART tree on all rows; mostly useful for tests."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    samples = np.arange(X.shape[0], dtype=np.int64)
    mf = X.shape[1] if max_features is None else max_features
    tree = grow_tree(X, y, samples, np.ones(X.shape[0]), presort(X), max_depth, mf, 1, seed)
    params = _pack([tree])
    params.update(weight=1.0, init=0.0)
    return params


def fit_forest(Xs: np.ndarray, y: np.ndarray, hp, seed: int) -> dict:
    n, d = Xs.shape
    n_trees = int(hp["n_estimators"])
    max_features = max(1, math.ceil(d / 3))
    rng = np.random.default_rng(seed)
    boot = rng.integers(0, n, size=(n_trees, n))
    seeds = rng.integers(0, 2**31 - 1, size=n_trees)
    fe, th, le, ri, va, offsets = _forest(
        Xs, np.ascontiguousarray(y), boot, seeds, presort(Xs), max_features
    )
    return {
        "feature": fe,
        "threshold": th,
        "left": le,
        "right": ri,
        "value": va,
        "offsets": offsets,
        "weight": 1.0 / n_trees,
        "init": 0.0,
    }


def fit_gbm(Xs: np.ndarray, y: np.ndarray, hp, seed) -> dict:
    fe, th, le, ri, va, offsets, init = _gbm(
        Xs, np.ascontiguousarray(y), presort(Xs), int(hp["n_estimators"]), GBM_DEPTH, GBM_SHRINKAGE
    )
    return {
        "feature": fe,
        "threshold": th,
        "left": le,
        "right": ri,
        "value": va,
        "offsets": offsets,
        "weight": GBM_SHRINKAGE,
        "init": float(init),
    }


def predict_trees(params, Xs: np.ndarray) -> np.ndarray:
    return predict_ensemble(
        np.ascontiguousarray(Xs),
        params["feature"],
        params["threshold"],
        params["left"],
        params["right"],
        params["value"],
        params["offsets"],
        params["weight"],
        params["init"],
    )
