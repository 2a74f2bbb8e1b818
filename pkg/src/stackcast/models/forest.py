"""Random forest regression: bagged CART trees with exact variance-reduction
splits, every feature eligible at every split, mean-valued leaves.

Tree growth keeps one presorted index array per feature and stable-partitions
it at each split, so a depth-D tree costs O(D * d * n) after the initial sort.
The grower is numba-compiled; all randomness (bootstrap draws) happens outside
the kernel through a seeded Generator, so fits are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MIN_ROWS = 100


@njit(cache=True)
def _grow(X, y, order, max_depth):  # pragma: no cover - exercised via fit
    n, d = X.shape
    max_nodes = 4 * n + 4
    feat = np.full(max_nodes, -1, np.int64)
    thr = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)
    depth_of = np.zeros(max_nodes, np.int64)

    stack_node = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int64)
    stack_node[0], stack_lo[0], stack_hi[0], stack_depth[0] = 0, 0, n, 0
    top = 1
    n_nodes = 1
    buf = np.empty(n, np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        depth_of[node] = depth
        m = hi - lo
        tot = 0.0
        for k in range(lo, hi):
            tot += y[order[0, k]]
        value[node] = tot / m
        if depth >= max_depth or m < 2:
            continue
        best_gain = 1e-12
        best_f = -1
        best_nl = 0
        best_cut = 0.0
        base = tot * tot / m
        for f in range(d):
            sl = 0.0
            for k in range(lo, hi - 1):
                r = order[f, k]
                sl += y[r]
                xk = X[r, f]
                xn = X[order[f, k + 1], f]
                if xn > xk:
                    nl = k - lo + 1
                    nr = m - nl
                    sr = tot - sl
                    gain = sl * sl / nl + sr * sr / nr - base
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_nl = nl
                        cut = 0.5 * (xk + xn)
                        if cut >= xn:  # adjacent floats: fall back to the left value
                            cut = xk
                        best_cut = cut
        if best_f < 0:
            continue
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_cut
        left[node] = lid
        right[node] = rid
        for f in range(d):
            a = lo
            b = lo + best_nl
            for k in range(lo, hi):
                r = order[f, k]
                if X[r, best_f] <= best_cut:
                    buf[a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for k in range(lo, hi):
                order[f, k] = buf[k]
        stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top] = lid, lo, lo + best_nl, depth + 1
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top] = rid, lo + best_nl, hi, depth + 1
        top += 1

    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], depth_of[:n_nodes]


@njit(cache=True)
def _predict_into(X, feat, thr, left, right, value, out):  # pragma: no cover
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


@dataclass(frozen=True)
class Tree:
    feat: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth_of: np.ndarray

    def max_depth(self) -> int:
        return int(self.depth_of.max())


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[Tree, ...]
    n_features: int
    y_min: float
    y_max: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected (n, {self.n_features}) input, got {X.shape}")
        out = np.zeros(X.shape[0])
        for t in self.trees:
            _predict_into(X, t.feat, t.thr, t.left, t.right, t.value, out)
        return out / len(self.trees)


def fit_random_forest(X: np.ndarray, y: np.ndarray, n_estimators: int = 400,
                      max_depth: int = 8, seed: int = 0) -> RandomForest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n < MIN_ROWS:
        raise ValueError(f"need at least {MIN_ROWS} rows, got {n}")
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_estimators):
        idx = rng.integers(0, n, n)
        Xs = np.ascontiguousarray(X[idx])
        ys = y[idx]
        order = np.empty((d, n), dtype=np.int64)
        for f in range(d):
            order[f] = np.argsort(Xs[:, f], kind="stable")
        trees.append(Tree(*_grow(Xs, ys, order, max_depth)))
    return RandomForest(trees=tuple(trees), n_features=d, y_min=float(y.min()), y_max=float(y.max()))
