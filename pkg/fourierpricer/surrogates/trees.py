"""Histogram-binned CART regression trees.

Features are binned once per training set. A split at threshold t sends rows
with x <= t to the left child, so trees predict from raw feature values with
the same routing they were trained with.
"""
import logging
from typing import Optional

import numpy as np

from fourierpricer.errors import ValidationError

LOGGER = logging.getLogger(__name__)

LEAF = -1


class QuantileBinner:
    def __init__(self, n_bins: int = 256):
        if n_bins < 2:
            raise ValidationError(f"Need at least 2 bins, got {n_bins}")
        self.n_bins = n_bins
        self.thresholds: list[np.ndarray] = []

    def fit(self, X: np.ndarray) -> 'QuantileBinner':
        """distinct values when few, quantiles otherwise"""
        self.thresholds = []
        for column in np.asarray(X, dtype = float).T:
            distinct = np.unique(column)
            if len(distinct) <= self.n_bins:
                cuts = distinct[:-1]
            else:
                cuts = np.unique(np.quantile(column, np.linspace(0, 1, self.n_bins + 1)[1:-1]))
                cuts = cuts[cuts < distinct[-1]]
            self.thresholds.append(cuts)
        return self

    @property
    def max_bins(self) -> int:
        return max(len(t) for t in self.thresholds) + 1

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype = float)
        codes = np.empty(X.shape, dtype = np.int32)
        for f, cuts in enumerate(self.thresholds):
            codes[:, f] = np.searchsorted(cuts, X[:, f], side = 'left')
        return codes


class RegressionTree:
    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype = np.int64)
        self.threshold = np.asarray(threshold, dtype = float)
        self.left = np.asarray(left, dtype = np.int64)
        self.right = np.asarray(right, dtype = np.int64)
        self.value = np.asarray(value, dtype = float)

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype = np.int64)
        for node in range(self.n_nodes):
            if self.left[node] != LEAF:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype = float))
        rows = np.arange(len(X))
        node = np.zeros(len(X), dtype = np.int64)
        active = self.left[node] != LEAF
        while active.any():
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            child = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, child, node)
            active = self.left[node] != LEAF
        return self.value[node]


def _best_split(codes: np.ndarray, y: np.ndarray, n_bins: np.ndarray, max_bins: int, min_leaf: int):
    n, n_features = codes.shape
    flat = (codes + np.arange(n_features) * max_bins).ravel()
    sums = np.bincount(flat, weights = np.repeat(y, n_features), minlength = n_features * max_bins)
    counts = np.bincount(flat, minlength = n_features * max_bins)

    left_sum = np.cumsum(sums.reshape(n_features, max_bins), axis = 1)[:, :-1]
    left_count = np.cumsum(counts.reshape(n_features, max_bins), axis = 1)[:, :-1]
    right_sum = y.sum() - left_sum
    right_count = n - left_count

    valid = (left_count >= min_leaf) & (right_count >= min_leaf)
    valid &= np.arange(max_bins - 1)[None, :] < (n_bins - 1)[:, None]
    if not valid.any():
        return None

    with np.errstate(divide = 'ignore', invalid = 'ignore'):
        gain = left_sum ** 2 / left_count + right_sum ** 2 / right_count
    gain = np.where(valid, gain, -np.inf)
    feature, cut = np.unravel_index(int(np.argmax(gain)), gain.shape)
    return int(feature), int(cut)


def tree_fit(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    bins: int = 256,
    min_leaf: int = 1,
    binner: Optional[QuantileBinner] = None,
    codes: Optional[np.ndarray] = None
) -> RegressionTree:
    """
    Grow a variance-reduction tree depth first.

    Args:
        X: raw features (n, f)
        y: targets (n,)
        max_depth: maximum depth, root at depth 0
        bins: histogram bins per feature when no binner is given
        min_leaf: minimum rows per child
        binner: pre-fitted binner shared across trees
        codes: X already transformed by binner

    Returns:
        RegressionTree whose leaves hold mean targets
    """
    X = np.atleast_2d(np.asarray(X, dtype = float))
    y = np.asarray(y, dtype = float)
    if len(y) == 0:
        raise ValidationError("Cannot fit a tree on zero records")
    if max_depth < 0 or min_leaf < 1:
        raise ValidationError(f"Need max_depth >= 0 and min_leaf >= 1, got {max_depth}, {min_leaf}")

    if binner is None:
        binner = QuantileBinner(bins).fit(X)
        codes = None
    if codes is None:
        codes = binner.transform(X)
    n_bins = np.array([len(t) + 1 for t in binner.thresholds])
    max_bins = binner.max_bins

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows: np.ndarray) -> int:
        feature.append(0)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[rows])))
        return len(value) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        targets = y[rows]
        if depth >= max_depth or len(rows) < 2 * min_leaf or np.ptp(targets) == 0:
            continue
        split = _best_split(codes[rows], targets, n_bins, max_bins, min_leaf)
        if split is None:
            continue

        f, cut = split
        goes_left = codes[rows, f] <= cut
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        feature[node] = f
        threshold[node] = float(binner.thresholds[f][cut])
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return RegressionTree(feature, threshold, left, right, value)
