"""Binary CART grown best-first on Gini impurity, with a cap on internal nodes."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DimensionMismatch

_MIN_GAIN = 1e-12


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


@dataclass
class Split:
    feature: int
    threshold: float
    gain: float  # n * gini(parent) - n_l * gini(left) - n_r * gini(right)


def best_split(x: np.ndarray, y: np.ndarray, n_classes: int) -> Optional[Split]:
    """Exhaustive search over features and midpoints between distinct values.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    n, d = x.shape
    if n < 2:
        return None
    parent = np.bincount(y, minlength=n_classes).astype(np.float64)
    parent_impurity = n * gini(parent)
    if parent_impurity <= _MIN_GAIN:
        return None
    onehot = np.eye(n_classes)[y]
    best: Optional[Split] = None
    for f in range(d):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]  # left counts after i+1 samples
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        right = parent - left
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        # n_l * gini_l = n_l - sum(c^2)/n_l
        weighted = (n_left - np.sum(left * left, axis=1) / n_left) + (
            n_right - np.sum(right * right, axis=1) / n_right
        )
        gains = np.where(valid, parent_impurity - weighted, -np.inf)
        i = int(np.argmax(gains))
        g = float(gains[i])
        if g <= _MIN_GAIN:
            continue
        if best is None or g > best.gain + 1e-12:
            lo, hi = xs[i], xs[i + 1]
            t = lo + (hi - lo) / 2.0
            if not lo < t <= hi:
                t = hi
            best = Split(f, float(t), g)
    return best


@dataclass
class DecisionTreeModel:
    """Flat node arrays; ``left[i] == -1`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[list[float]] = field(default_factory=list)
    gains: list[float] = field(default_factory=list)  # gain of each accepted split, in order
    n_features: int = 0
    n_classes: int = 0

    @property
    def split_count(self) -> int:
        return sum(1 for child in self.left if child >= 0)

    def _add_leaf(self, counts: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts.astype(float).tolist())
        return len(self.feature) - 1

    def leaf_of(self, x: np.ndarray) -> int:
        node = 0
        while self.left[node] >= 0:
            node = self.left[node] if x[self.feature[node]] < self.threshold[node] else self.right[node]
        return node

    def predict_proba(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[1]}")
        out = np.empty((x.shape[0], self.n_classes))
        for i, row in enumerate(x):
            c = np.asarray(self.counts[self.leaf_of(row)])
            out[i] = c / c.sum()
        return out

    def predict(self, x) -> np.ndarray:
        # argmax returns the lowest class id on ties
        return np.argmax(self.predict_proba(x), axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "counts": self.counts,
            "gains": self.gains,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTreeModel":
        return cls(**d)


def tree_fit(x, y, max_splits: int = 20, n_classes: Optional[int] = None) -> DecisionTreeModel:
    """Grow a Gini tree best-first.

    The frontier leaf whose best split has the largest impurity decrease is
    split next, until ``max_splits`` internal nodes exist or no split has
    positive gain. A single-class training set yields a one-leaf tree.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise DimensionMismatch("x must be (N, d) with one label per row")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    model = DecisionTreeModel(n_features=x.shape[1], n_classes=n_classes)
    root = model._add_leaf(np.bincount(y, minlength=n_classes))

    frontier: list = []
    rows = {root: np.arange(len(y))}

    def consider(node: int) -> None:
        idx = rows[node]
        split = best_split(x[idx], y[idx], n_classes)
        if split is not None:
            # equal gains pop in node-creation order
            heapq.heappush(frontier, (-split.gain, node, split))

    consider(root)
    while frontier and model.split_count < max_splits:
        _, node, split = heapq.heappop(frontier)
        idx = rows.pop(node)
        go_left = x[idx, split.feature] < split.threshold
        li, ri = idx[go_left], idx[~go_left]
        lnode = model._add_leaf(np.bincount(y[li], minlength=n_classes))
        rnode = model._add_leaf(np.bincount(y[ri], minlength=n_classes))
        model.feature[node] = split.feature
        model.threshold[node] = split.threshold
        model.left[node] = lnode
        model.right[node] = rnode
        model.gains.append(split.gain)
        rows[lnode], rows[rnode] = li, ri
        consider(lnode)
        consider(rnode)
    return model
