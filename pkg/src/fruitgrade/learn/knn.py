"""k-nearest-neighbor voting under euclidean, cosine or cubic Minkowski distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, ZeroVector

METRICS = ("euclidean", "cosine", "minkowski3")
WEIGHTINGS = ("uniform", "squared_inverse")


def pairwise_distance(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    """Distances between rows of ``a`` (queries) and rows of ``b`` (training set)."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if metric == "euclidean":
        return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))
    if metric == "minkowski3":
        return np.cbrt(np.sum(np.abs(a[:, None, :] - b[None, :, :]) ** 3, axis=-1))
    if metric == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        if np.any(na == 0) or np.any(nb == 0):
            raise ZeroVector("cosine distance is undefined for a zero vector")
        sim = (a @ b.T) / np.outer(na, nb)
        return 1.0 - np.clip(sim, -1.0, 1.0)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int = 10
    metric: str = "euclidean"
    weighting: str = "uniform"
    n_classes: int = 0

    def __post_init__(self):
        self.train_x = np.asarray(self.train_x, dtype=np.float64)
        self.train_y = np.asarray(self.train_y, dtype=int)
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if not 1 <= self.k <= len(self.train_y):
            raise ValueError("k must lie in [1, N]")
        if not self.n_classes:
            self.n_classes = int(self.train_y.max()) + 1

    def votes(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.train_x.shape[1]:
            raise DimensionMismatch(f"expected {self.train_x.shape[1]} features, got {x.shape[1]}")
        dist = pairwise_distance(x, self.train_x, self.metric)
        # stable sort: equidistant neighbors are taken in training order
        nearest = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
        out = np.zeros((x.shape[0], self.n_classes))
        for i, idx in enumerate(nearest):
            d = dist[i, idx]
            labels = self.train_y[idx]
            if self.weighting == "uniform":
                np.add.at(out[i], labels, 1.0)
            elif np.any(d == 0):
                # exact matches decide outright
                np.add.at(out[i], labels[d == 0], 1.0)
            else:
                np.add.at(out[i], labels, 1.0 / (d * d))
        return out

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.votes(x), axis=1)

    def to_dict(self) -> dict:
        return {
            "train_x": self.train_x.tolist(),
            "train_y": self.train_y.tolist(),
            "k": self.k,
            "metric": self.metric,
            "weighting": self.weighting,
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        return cls(**d)


def knn_fit(x, y, k: int = 10, metric: str = "euclidean", weighting: str = "uniform", n_classes: int = 0) -> KnnModel:
    y = np.asarray(y, dtype=int)
    return KnnModel(np.asarray(x, dtype=np.float64), y, min(k, len(y)), metric, weighting, n_classes)
