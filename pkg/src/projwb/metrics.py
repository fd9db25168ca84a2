"""Visual quality metrics and the weighted composite score.

Three per-projection metrics are computed against ground truth:

* ``stress``: normalized root of squared pairwise-distance discrepancies
  between the original space and the 2-D layout. Lower is better, and it is
  the only one of the three that reacts to uniform rescaling of the layout.
* ``neighborhood_preservation``: mean fraction of each point's k nearest
  neighbors shared between the two spaces (set overlap, in [0, 1]).
* ``silhouette``: mean of (b - a) / max(a, b) over points, clustered by the
  ground-truth class labels.

The composite score is the affine combination
``w1 + w2 * sc + w3 * stress + w4 * np``; the weights are what the learning
module fits per user.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import DistanceMatrix, pairwise_distances


@dataclass(frozen=True)
class MetricVector:
    """The (silhouette, stress, neighborhood-preservation) triple for one projection."""

    sc: float
    stress: float
    np: float
    np_k: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sc) and -1.0 <= self.sc <= 1.0):
            raise ValueError(f"sc out of [-1, 1]: {self.sc}")
        if not (math.isfinite(self.stress) and self.stress >= 0.0):
            raise ValueError(f"stress must be finite and >= 0: {self.stress}")
        if not (math.isfinite(self.np) and 0.0 <= self.np <= 1.0):
            raise ValueError(f"np out of [0, 1]: {self.np}")
        if self.np_k < 1:
            raise ValueError(f"np_k must be >= 1, got {self.np_k}")

    def to_dict(self) -> dict:
        return {"sc": self.sc, "stress": self.stress, "np": self.np, "np_k": self.np_k}


@dataclass(frozen=True)
class WeightVector:
    """Weights of the composite score: bias, then one weight per metric."""

    w1: float  # bias
    w2: float  # silhouette weight
    w3: float  # stress weight
    w4: float  # neighborhood preservation weight

    def __post_init__(self) -> None:
        for name in ("w1", "w2", "w3", "w4"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4], dtype=np.float64)

    def to_dict(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "w3": self.w3, "w4": self.w4}


@dataclass(frozen=True)
class SilhouetteReport:
    """Per-point silhouette terms plus the overall mean."""

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    overall: float


def stress(d_high: DistanceMatrix, d_low: DistanceMatrix) -> float:
    """sqrt( sum_{i<j} (d_ij - d'_ij)^2 / sum_{i<j} d_ij^2 ).

    Summing over unordered pairs; the double-index sum gives the identical
    ratio. Raises if the original distances are all zero.
    """
    if d_high.n != d_low.n:
        raise ValueError(f"size mismatch: {d_high.n} vs {d_low.n}")
    dh = d_high.upper_pairs()
    dl = d_low.upper_pairs()
    denom = float(np.dot(dh, dh))
    if denom == 0.0:
        raise ValueError("stress undefined: all original distances are zero")
    diff = dh - dl
    return float(np.sqrt(np.dot(diff, diff) / denom))


def _knn_sets(values: np.ndarray, k: int) -> np.ndarray:
    """(n, k) neighbor indices per row; self excluded, ties by ascending index."""
    n = values.shape[0]
    # stable sort on distances == tie-break by ascending point index
    order = np.argsort(values, axis=1, kind="stable")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = order[i]
        out[i] = row[row != i][:k]
    return out


def neighborhood_preservation(d_high: DistanceMatrix, d_low: DistanceMatrix, k: int) -> float:
    """Mean k-NN set overlap between the two spaces, in [0, 1]."""
    if d_high.n != d_low.n:
        raise ValueError(f"size mismatch: {d_high.n} vs {d_low.n}")
    n = d_high.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    high = _knn_sets(d_high.values, k)
    low = _knn_sets(d_low.values, k)
    total = 0
    for i in range(n):
        total += np.intersect1d(high[i], low[i], assume_unique=True).size
    return total / (n * k)


def silhouette(coords: np.ndarray, labels: np.ndarray) -> SilhouetteReport:
    """Silhouette of the 2-D layout, clustered by ground-truth labels.

    a(i) is the mean distance to the other members of i's class, b(i) the
    smallest mean distance to any other class. Points in singleton classes
    contribute s(i) = 0.
    """
    labels = np.asarray(labels)
    classes, encoded = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise ValueError("silhouette requires at least 2 distinct labels")
    dist = pairwise_distances(np.asarray(coords, dtype=np.float64)).values
    n = dist.shape[0]
    if labels.shape[0] != n:
        raise ValueError(f"{labels.shape[0]} labels for {n} points")

    counts = np.bincount(encoded, minlength=classes.size)
    # sums[i, c] = total distance from point i to class c
    sums = np.zeros((n, classes.size))
    for c in range(classes.size):
        sums[:, c] = dist[:, encoded == c].sum(axis=1)

    own = encoded
    own_count = counts[own]
    a = np.zeros(n)
    nontrivial = own_count > 1
    a[nontrivial] = sums[np.arange(n), own][nontrivial] / (own_count[nontrivial] - 1)

    other_means = sums / counts[np.newaxis, :]
    other_means[np.arange(n), own] = np.inf
    b = other_means.min(axis=1)

    s = np.zeros(n)
    denom = np.maximum(a, b)
    ok = nontrivial & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return SilhouetteReport(s=s, a=a, b=b, overall=float(s.mean()))


def silhouette_score(coords: np.ndarray, labels: np.ndarray) -> float:
    return silhouette(coords, labels).overall


def composite(m: MetricVector, w: WeightVector) -> float:
    """w1 + w2*sc + w3*stress + w4*np."""
    return w.w1 + w.w2 * m.sc + w.w3 * m.stress + w.w4 * m.np


def evaluate_projection(
    d_high: DistanceMatrix,
    coords: np.ndarray,
    labels: np.ndarray,
    np_k: int,
) -> MetricVector:
    """All three metrics of one 2-D layout against the original distances."""
    d_low = pairwise_distances(coords)
    return MetricVector(
        sc=silhouette_score(coords, labels),
        stress=stress(d_high, d_low),
        np=neighborhood_preservation(d_high, d_low, np_k),
        np_k=np_k,
    )
