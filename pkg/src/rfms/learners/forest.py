"""Random forest of CART trees: Gini splits, bootstrap per tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeds import rng_for

LEAF = -1
MIN_GINI_GAIN = 1e-12


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; feature == LEAF marks a leaf carrying the positive-class share."""

    feature: np.ndarray    # int32, LEAF for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    leaf_prob: np.ndarray  # float64, positive-class probability at leaves

    def predict_proba(self, z: np.ndarray) -> np.ndarray:
        node = np.zeros(z.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = z[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return self.leaf_prob[node]


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[Tree, ...]
    mean: np.ndarray
    scale: np.ndarray

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        z = (features - self.mean) / self.scale
        probs = np.zeros(z.shape[0])
        for tree in self.trees:
            probs += tree.predict_proba(z)
        return probs / len(self.trees)


def _best_split(z: np.ndarray, y: np.ndarray, rows: np.ndarray, feats: np.ndarray):
    """Lowest weighted Gini split over candidate features; None when no valid split."""
    n = rows.size
    parent_pos = y[rows].sum()
    p = parent_pos / n
    parent_gini = 1.0 - p * p - (1.0 - p) ** 2
    best = None
    for f in feats:
        col = z[rows, f]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        ys = y[rows][order]
        boundaries = np.flatnonzero(cs[:-1] < cs[1:])
        if boundaries.size == 0:
            continue
        pos_prefix = np.cumsum(ys)
        n_left = boundaries + 1.0
        n_right = n - n_left
        pos_left = pos_prefix[boundaries]
        pos_right = parent_pos - pos_left
        pl = pos_left / n_left
        pr = pos_right / n_right
        gini = (n_left * (1 - pl * pl - (1 - pl) ** 2) + n_right * (1 - pr * pr - (1 - pr) ** 2)) / n
        k = int(np.argmin(gini))
        if gini[k] < parent_gini - MIN_GINI_GAIN and (best is None or gini[k] < best[0]):
            best = (float(gini[k]), int(f), float(0.5 * (cs[boundaries[k]] + cs[boundaries[k] + 1])))
    return best


def _grow_tree(z: np.ndarray, y: np.ndarray, rows: np.ndarray, min_node: int, mtry: int, rng) -> Tree:
    feature, threshold, left, right, prob = [], [], [], [], []
    p = z.shape[1]

    def leaf(node_rows) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        prob.append(float(y[node_rows].mean()))
        return len(feature) - 1

    def build(node_rows) -> int:
        pos = y[node_rows].sum()
        if node_rows.size <= min_node or pos == 0 or pos == node_rows.size:
            return leaf(node_rows)
        feats = rng.choice(p, size=min(mtry, p), replace=False)
        split = _best_split(z, y, node_rows, feats)
        if split is None:
            return leaf(node_rows)
        _, f, thr = split
        idx = len(feature)
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        prob.append(0.0)
        mask = z[node_rows, f] <= thr
        left[idx] = build(node_rows[mask])
        right[idx] = build(node_rows[~mask])
        return idx

    build(rows)
    return Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(prob, dtype=np.float64),
    )


def fit_random_forest(
    z: np.ndarray,
    y: np.ndarray,
    num_trees: int,
    min_node_size: int,
    sample_fraction: float,
    seed: int,
) -> tuple[Tree, ...]:
    """Grow the forest on standardized features; one seeded stream per tree."""
    n, p = z.shape
    boot_size = max(1, int(round(sample_fraction * n)))
    mtry = max(1, int(np.floor(np.sqrt(p))))
    trees = []
    for t in range(num_trees):
        rng = rng_for(seed, "tree", t)
        rows = rng.integers(0, n, size=boot_size)
        trees.append(_grow_tree(z, y, rows, min_node_size, mtry, rng))
    return tuple(trees)
