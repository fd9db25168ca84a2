"""Dataset ingestion, standardization, and pairwise distances.

Everything downstream (projectors, metrics, the rating service) consumes the
types defined here. Feature matrices are z-scored before any distance is
taken, so heterogeneous feature scales (e.g. the wine chemistry columns)
cannot dominate the Euclidean geometry.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

BUILTIN_DATASETS = ("iris", "wine", "digits", "breast_cancer")


class DataError(ValueError):
    """Raised when an input file violates the data contract."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """A labeled feature matrix with provenance metadata.

    Invariants checked at construction: at least 3 rows and 1 feature, all
    feature values finite, one label per row, and at least 2 distinct classes
    (the silhouette score is undefined for a single cluster).
    """

    id: str
    name: str
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, dense ids 0..c-1
    feature_names: tuple[str, ...]
    source: str

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 3 or feats.shape[1] < 1:
            raise DataError(f"dataset {self.id!r}: need at least 3 rows and 1 feature, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise DataError(f"dataset {self.id!r}: non-finite feature values")
        if labs.shape != (feats.shape[0],):
            raise DataError(f"dataset {self.id!r}: {labs.shape[0]} labels for {feats.shape[0]} rows")
        if np.unique(labs).size < 2:
            raise DataError(f"dataset {self.id!r}: fewer than 2 classes")
        if len(self.feature_names) != feats.shape[1]:
            raise DataError(f"dataset {self.id!r}: {len(self.feature_names)} feature names for {feats.shape[1]} columns")
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", _readonly(labs))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.labels).size)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric Euclidean distance matrix with a zero diagonal."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"distance matrix must be square, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(np.diag(v) != 0.0):
            raise ValueError("distance matrix diagonal must be exactly 0")
        if not np.array_equal(v, v.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(v < 0.0):
            raise ValueError("distances must be non-negative")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_points(cls, points: np.ndarray) -> "DistanceMatrix":
        return pairwise_distances(points)

    def upper_pairs(self) -> np.ndarray:
        """Entries above the diagonal, flattened (each unordered pair once)."""
        n = self.n
        iu = np.triu_indices(n, k=1)
        return self.values[iu]


def pairwise_distances(points: np.ndarray) -> DistanceMatrix:
    """Euclidean distance matrix of an (n, k) point set."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"expected a 2-D point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite values")
    # squareform(pdist(...)) is symmetric with an exact-zero diagonal by construction
    return DistanceMatrix(squareform(pdist(pts)))


def standardize(dataset: Dataset) -> Dataset:
    """Z-score each feature column (population std); constant columns stay at 0."""
    feats = dataset.features
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    scale = np.where(std == 0.0, 1.0, std)
    out = (feats - mean) / scale
    return Dataset(
        id=dataset.id,
        name=dataset.name,
        features=out,
        labels=dataset.labels,
        feature_names=dataset.feature_names,
        source=dataset.source,
    )


def _parse_cell(text: str, row: int, col_name: str, path: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(
            f"{path}: non-numeric value {text!r} at data row {row}, column {col_name!r}"
        ) from None


def load_dataset(
    path: str | Path,
    *,
    label_column: str = "label",
    dataset_id: str | None = None,
    name: str | None = None,
) -> Dataset:
    """Load a labeled CSV (header required, UTF-8).

    All non-label columns must be numeric. Labels may be arbitrary strings or
    numbers; they are encoded as dense integer ids in order of first
    appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)

        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"{path}: data row {r} has {len(record)} cells, expected {len(header)}")
            raw_labels.append(record[label_idx].strip())
            rows.append(
                [
                    _parse_cell(cell.strip(), r, header[i], str(path))
                    for i, cell in enumerate(record)
                    if i != label_idx
                ]
            )

    if not rows:
        raise DataError(f"{path}: no data rows")

    # dense ids in first-appearance order
    seen: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, lab in enumerate(raw_labels):
        if lab not in seen:
            seen[lab] = len(seen)
        labels[i] = seen[lab]
    if len(seen) < 2:
        raise DataError(f"{path}: fewer than 2 classes in column {label_column!r}")

    did = dataset_id if dataset_id is not None else path.stem
    return Dataset(
        id=did,
        name=name if name is not None else did,
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        feature_names=feature_names,
        source=str(path),
    )


def builtin_dataset_path(name: str) -> Path:
    if name not in BUILTIN_DATASETS:
        raise DataError(f"unknown builtin dataset {name!r}; available: {', '.join(BUILTIN_DATASETS)}")
    return Path(str(resources.files("projwb").joinpath("data", f"{name}.csv")))


def load_builtin(name: str) -> Dataset:
    """Load one of the bundled datasets (iris, wine, digits, breast_cancer)."""
    return load_dataset(builtin_dataset_path(name), dataset_id=name, name=name)


def resolve_dataset(ref: str, *, label_column: str = "label") -> Dataset:
    """Resolve a dataset reference: a builtin name or a CSV path."""
    if ref in BUILTIN_DATASETS:
        return load_builtin(ref)
    return load_dataset(ref, label_column=label_column)


def subsample(dataset: Dataset, size: int, seed: int) -> Dataset:
    """Deterministic uniform row subsample (keeps at least 2 classes).

    Off by default in the sweep; intended for slow machines where the full
    digits set is too heavy.
    """
    if size >= dataset.n:
        return dataset
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(dataset.n, size=size, replace=False))
    labels = dataset.labels[idx]
    if np.unique(labels).size < 2:
        raise DataError("subsample left fewer than 2 classes; increase size")
    return Dataset(
        id=dataset.id,
        name=dataset.name,
        features=dataset.features[idx],
        labels=labels,
        feature_names=dataset.feature_names,
        source=dataset.source,
    )
