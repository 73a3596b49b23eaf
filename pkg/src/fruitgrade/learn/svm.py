"""Kernel SVM: SMO-type dual solver and one-vs-one multiclass voting."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from ..errors import DimensionMismatch

_TAU = 1e-12


@dataclass(frozen=True)
class Kernel:
    name: str = "linear"  # linear | poly | gaussian
    degree: int = 3
    gamma: float = 1.0

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        if self.name == "linear":
            return a @ b.T
        if self.name == "poly":
            return (a @ b.T + 1.0) ** self.degree
        if self.name == "gaussian":
            sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        raise ValueError(f"unknown kernel {self.name!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "degree": self.degree, "gamma": self.gamma}


@dataclass
class BinarySolution:
    alpha: np.ndarray
    rho: float
    iterations: int
    converged: bool
    gap: float  # final maximal KKT violation m(alpha) - M(alpha)


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 100_000) -> BinarySolution:
    """Minimize 0.5 a'Qa - e'a subject to 0 <= a <= C, y'a = 0, with Q = yy' * K.

    Each iteration updates one pair picked by maximal violation for the first
    index and second-order gain for the second. Stops once the violation gap
    drops below ``tol``.
    """
    n = len(y)
    y = y.astype(np.float64)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    it = 0
    gap = np.inf
    converged = False
    while it < max_iter:
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m = score[i]
        big_m = score[low].min()
        gap = m - big_m
        if gap < tol:
            converged = True
            break

        cand = low & (score < m)
        b = m - score[cand]
        a = diag[i] + diag[cand] - 2.0 * K[i, cand]
        a = np.where(a > 0, a, _TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])

        curv = diag[i] + diag[j] - 2.0 * K[i, j]
        delta = (m - score[j]) / (curv if curv > 0 else _TAU)
        limit_i = C - alpha[i] if y[i] > 0 else alpha[i]
        limit_j = alpha[j] if y[j] > 0 else C - alpha[j]
        delta = min(delta, limit_i, limit_j)

        old_i, old_j = alpha[i], alpha[j]
        alpha[i] += y[i] * delta
        alpha[j] -= y[j] * delta
        for t in (i, j):
            if alpha[t] < 1e-14 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1 - 1e-14):
                alpha[t] = C
        grad += y * (y[i] * (alpha[i] - old_i) * K[:, i] + y[j] * (alpha[j] - old_j) * K[:, j])
        it += 1

    free = (alpha > 0) & (alpha < C)
    yg = y * grad
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= C
        ub_mask = ((y > 0) & ~at_upper) | ((y < 0) & at_upper)
        lb_mask = ((y > 0) & at_upper) | ((y < 0) & ~at_upper)
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = float((ub + lb) / 2)
        else:
            rho = float(ub if np.isfinite(ub) else lb)
    return BinarySolution(alpha, rho, it, converged, float(gap))


@dataclass
class PairModel:
    positive: int  # class voted for when the decision value is >= 0
    negative: int
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # y_i * alpha_i, within [-C, C]
    rho: float
    train_rows: np.ndarray  # indices into the training set, for auditing

    def decision(self, kernel: Kernel, x: np.ndarray) -> np.ndarray:
        if len(self.dual_coef) == 0:
            return np.full(x.shape[0], -self.rho)
        return kernel(x, self.support_vectors) @ self.dual_coef - self.rho


@dataclass
class SvmModel:
    kernel: Kernel
    C: float
    n_classes: int
    n_features: int
    pairs: list[PairModel] = field(default_factory=list)
    converged: bool = True

    def votes(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[1]}")
        out = np.zeros((x.shape[0], self.n_classes))
        rows = np.arange(x.shape[0])
        for pair in self.pairs:
            winner = np.where(pair.decision(self.kernel, x) >= 0, pair.positive, pair.negative)
            out[rows, winner] += 1
        return out

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.votes(x), axis=1)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "converged": self.converged,
            "pairs": [
                {
                    "positive": p.positive,
                    "negative": p.negative,
                    "support_vectors": p.support_vectors.tolist(),
                    "dual_coef": p.dual_coef.tolist(),
                    "rho": p.rho,
                    "train_rows": p.train_rows.tolist(),
                }
                for p in self.pairs
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        pairs = [
            PairModel(
                p["positive"],
                p["negative"],
                np.asarray(p["support_vectors"], dtype=np.float64).reshape(-1, d["n_features"]),
                np.asarray(p["dual_coef"], dtype=np.float64),
                float(p["rho"]),
                np.asarray(p["train_rows"], dtype=int),
            )
            for p in d["pairs"]
        ]
        return cls(Kernel(**d["kernel"]), d["C"], d["n_classes"], d["n_features"], pairs, d.get("converged", True))


def svm_fit(
    x,
    y,
    kernel: str = "linear",
    degree: int = 3,
    gamma: Optional[float] = None,
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    n_classes: Optional[int] = None,
) -> SvmModel:
    """One-vs-one SVM; ``gamma`` defaults to 1 / n_features for the gaussian kernel."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if C <= 0:
        raise ValueError("C must be positive")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    present = sorted(set(y.tolist()))
    if len(present) < 2:
        raise ValueError("SVM needs at least two classes")
    kern = Kernel(kernel, degree, gamma if gamma is not None else 1.0 / x.shape[1])
    model = SvmModel(kern, C, n_classes, x.shape[1])
    for a, b in combinations(present, 2):
        rows = np.flatnonzero((y == a) | (y == b))
        yy = np.where(y[rows] == a, 1.0, -1.0)
        sol = solve_dual(kern(x[rows], x[rows]), yy, C, tol, max_iter)
        if not sol.converged:
            model.converged = False
            warnings.warn(f"SVM pair ({a}, {b}) stopped at {sol.iterations} iterations, gap {sol.gap:.2e}")
        sv = sol.alpha > 0
        model.pairs.append(PairModel(a, b, x[rows][sv], (yy * sol.alpha)[sv], sol.rho, rows[sv]))
    return model


def kkt_violation(model: SvmModel, pair_index: int, x, y) -> float:
    """Largest KKT violation of one pair problem on its own training rows."""
    pair = model.pairs[pair_index]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    rows = np.flatnonzero((y == pair.positive) | (y == pair.negative))
    yy = np.where(y[rows] == pair.positive, 1.0, -1.0)
    margin = yy * pair.decision(model.kernel, x[rows])
    alpha = np.zeros(len(rows))
    lookup = {r: k for k, r in enumerate(rows)}
    for r, c in zip(pair.train_rows, pair.dual_coef):
        alpha[lookup[int(r)]] = abs(c)
    C = model.C
    worst = 0.0
    for m, a in zip(margin, alpha):
        if a <= 0:
            worst = max(worst, 1 - m)
        elif a >= C:
            worst = max(worst, m - 1)
        else:
            worst = max(worst, abs(m - 1))
    return float(worst)
