"""Feature standardization, PCA projection and correlation-based feature selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NumericalFailure, TooFewRows

# a subset must beat the incumbent by this relative margin to count as better
_MERIT_EPS = 1e-12


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.means.shape[0]:
            raise DimensionMismatch(f"expected {self.means.shape[0]} features, got {x.shape[-1]}")
        return (x - self.means) / self.stds

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.stds + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["means"], dtype=np.float64), np.asarray(d["stds"], dtype=np.float64))


def fit_standardizer(data) -> Standardizer:
    """Per-feature mean and population standard deviation; constant features get std 1."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("standardizer needs at least 2 rows")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    constant = np.all(x == x[0], axis=0) | (stds <= 1e-12 * np.maximum(1.0, np.abs(means)))
    stds = np.where(constant, 1.0, stds)
    # constant columns must map to exactly zero
    means = np.where(constant, x[0], means)
    return Standardizer(means, stds)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    eigenvalues: np.ndarray  # (k,), descending
    explained_fraction: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_fraction": self.explained_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.atleast_2d(np.asarray(d["components"], dtype=np.float64)),
            np.asarray(d["eigenvalues"], dtype=np.float64),
            float(d["explained_fraction"]),
        )


def pca_fit(data, explained_target: float = 0.95, max_components: Optional[int] = None) -> PcaModel:
    """Principal components of the sample covariance.

    Keeps the smallest number of leading components whose eigenvalues reach
    ``explained_target`` of the total variance. Each component is signed so
    its largest-magnitude entry is positive.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("PCA needs at least 2 rows")
    if not 0 < explained_target <= 1:
        raise ValueError("explained_target must lie in (0, 1]")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    try:
        evals, evecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from None
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T

    total = evals.sum()
    if total <= 0:
        k = 1
    else:
        cumulative = np.cumsum(evals) / total
        # tolerate rounding in the cumulative sum at a target of exactly 1
        k = int(np.searchsorted(cumulative, explained_target - 1e-12) + 1)
        k = min(k, len(evals))
    if max_components is not None:
        k = min(k, max_components)

    comps = evecs[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    explained = float(evals[:k].sum() / total) if total > 0 else 1.0
    return PcaModel(mean, comps, evals[:k].copy(), explained)


def pca_project(model: PcaModel, x) -> np.ndarray:
    """``components @ (x - mean)`` for a vector or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise DimensionMismatch(f"expected {model.mean.shape[0]} features, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, z) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) @ model.components + model.mean


# --- CFS --------------------------------------------------------------------


def _abs_corr_with(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|Pearson| between each column of ``x`` and vector ``y``; zero-variance gives 0."""
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt(np.sum(xc * xc, axis=0))
    sy = math.sqrt(float(np.sum(yc * yc)))
    denom = sx * sy
    num = yc @ xc
    out = np.divide(np.abs(num), denom, out=np.zeros_like(sx), where=denom > 0)
    return np.minimum(out, 1.0)


def _abs_corr_matrix(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    norms = np.sqrt(np.sum(xc * xc, axis=0))
    cov = xc.T @ xc
    denom = np.outer(norms, norms)
    out = np.divide(np.abs(cov), denom, out=np.zeros_like(cov), where=denom > 0)
    return np.minimum(out, 1.0)


class CfsScorer:
    """Caches feature-class and feature-feature correlations for merit queries."""

    def __init__(self, data, labels):
        x = np.asarray(data, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DimensionMismatch("data rows and labels differ in length")
        self.r_cf = _abs_corr_with(x, y)
        self.r_ff = _abs_corr_matrix(x)

    def merit(self, subset: Sequence[int]) -> float:
        idx = np.asarray(list(subset), dtype=int)
        k = len(idx)
        if k == 0:
            raise ValueError("subset must be nonempty")
        rcf = self.r_cf[idx].mean()
        if k == 1:
            return float(rcf)
        block = self.r_ff[np.ix_(idx, idx)]
        rff = (block.sum() - np.trace(block)) / (k * (k - 1))
        return float(k * rcf / math.sqrt(k + k * (k - 1) * rff))


def cfs_merit(subset: Sequence[int], data, labels) -> float:
    """Merit of a feature subset: k * mean|r_cf| / sqrt(k + k(k-1) * mean|r_ff|)."""
    x = np.asarray(data, dtype=np.float64)[:, list(subset)]
    return CfsScorer(x, labels).merit(range(x.shape[1]))


@dataclass(frozen=True)
class FeatureSubset:
    indices: tuple[int, ...]
    merit: float

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "merit": self.merit}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSubset":
        return cls(tuple(int(i) for i in d["indices"]), float(d["merit"]))


def cfs_search(data, labels, stall_limit: int = 5) -> FeatureSubset:
    """Forward search over subsets scored by CFS merit.

    Starting from the empty set, each expansion adds the feature that gives
    the highest merit (lowest index on ties). The best subset seen so far is
    kept; the search stops after ``stall_limit`` consecutive expansions fail
    to beat it, or when every feature is in.
    """
    y = np.asarray(labels)
    if len(np.unique(y)) < 2:
        raise ValueError("CFS needs at least two classes")
    if stall_limit < 0:
        raise ValueError("stall_limit must be >= 0")
    scorer = CfsScorer(data, y)
    d = scorer.r_cf.shape[0]

    current: list[int] = []
    best: tuple[int, ...] = ()
    best_merit = -math.inf
    stall = 0
    while len(current) < d:
        remaining = [j for j in range(d) if j not in current]
        scores = [scorer.merit(current + [j]) for j in remaining]
        pick = int(np.argmax(scores))  # first maximum = lowest index
        current.append(remaining[pick])
        merit = scores[pick]
        if not best or merit > best_merit + _MERIT_EPS * max(1.0, abs(best_merit)):
            best, best_merit = tuple(sorted(current)), merit
            stall = 0
        else:
            stall += 1
        if stall >= stall_limit:
            break
    return FeatureSubset(best, best_merit)


# --- selection transform ----------------------------------------------------


@dataclass(frozen=True)
class SelectionTransform:
    """The fitted feature-selection stage applied before a classifier."""

    method: str = "none"  # none | pca | cfs
    standardizer: Optional[Standardizer] = None
    pca: Optional[PcaModel] = None
    subset: Optional[FeatureSubset] = None
    input_names: tuple[str, ...] = ()

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.input_names and x.shape[-1] != len(self.input_names):
            raise DimensionMismatch(f"expected {len(self.input_names)} features, got {x.shape[-1]}")
        if self.method == "none":
            return x
        if self.method == "pca":
            return pca_project(self.pca, self.standardizer.apply(x))
        if self.method == "cfs":
            return x[..., list(self.subset.indices)]
        raise ValueError(f"unknown selection method {self.method!r}")

    @property
    def output_names(self) -> list[str]:
        if self.method == "pca":
            return [f"pc{i + 1}" for i in range(self.pca.n_components)]
        if self.method == "cfs":
            return [self.input_names[i] if self.input_names else f"f{i}" for i in self.subset.indices]
        return list(self.input_names)

    def to_dict(self) -> dict:
        d: dict = {"method": self.method, "input_names": list(self.input_names)}
        if self.method == "pca":
            d["standardizer"] = self.standardizer.to_dict()
            d["pca"] = self.pca.to_dict()
        elif self.method == "cfs":
            d["subset"] = self.subset.to_dict()
            d["selected_names"] = self.output_names
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionTransform":
        method = d.get("method", "none")
        return cls(
            method=method,
            standardizer=Standardizer.from_dict(d["standardizer"]) if "standardizer" in d else None,
            pca=PcaModel.from_dict(d["pca"]) if "pca" in d else None,
            subset=FeatureSubset.from_dict(d["subset"]) if "subset" in d else None,
            input_names=tuple(d.get("input_names", ())),
        )


def fit_selection(
    data,
    labels,
    method: str = "none",
    pca_target: float = 0.95,
    cfs_stall: int = 5,
    names: Sequence[str] = (),
) -> SelectionTransform:
    x = np.asarray(data, dtype=np.float64)
    names = tuple(names)
    if method == "none":
        return SelectionTransform("none", input_names=names)
    if method == "pca":
        std = fit_standardizer(x)
        return SelectionTransform("pca", standardizer=std, pca=pca_fit(std.apply(x), pca_target), input_names=names)
    if method == "cfs":
        return SelectionTransform("cfs", subset=cfs_search(x, labels, cfs_stall), input_names=names)
    raise ValueError(f"unknown selection method {method!r}")
