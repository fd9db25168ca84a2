"""Projection records: typed params, opaque ids, file round-trips, imports.

A projection is an immutable (coords, provenance) pair. Ids are short
content hashes so nothing about the producing technique can be read off
them; the rating service shows ids to users who must stay blind to the
technique.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .datasets import DataError, Dataset, _readonly

TECHNIQUES = ("tsne", "umap", "lamp", "imported")

# params each technique must set; everything else must stay unset
_REQUIRED = {
    "tsne": ("perplexity", "iterations", "learning_rate"),
    "umap": ("n_neighbors", "iterations", "learning_rate"),
    "lamp": ("control_fraction",),
    "imported": (),
}
_OPTIONAL = {"umap": ("neighbor_fraction",)}


@dataclass(frozen=True)
class ProjectionParams:
    """Hyperparameters of one projector run; unused fields stay None."""

    perplexity: float | None = None
    n_neighbors: int | None = None
    neighbor_fraction: float | None = None
    control_fraction: float | None = None
    iterations: int | None = None
    learning_rate: float | None = None

    def validate_for(self, technique: str) -> None:
        required = _REQUIRED[technique]
        allowed = set(required) | set(_OPTIONAL.get(technique, ()))
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in required and value is None:
                raise ValueError(f"{technique} requires params.{f.name}")
            if f.name not in allowed and value is not None:
                raise ValueError(f"params.{f.name} is not a {technique} parameter")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown projection params: {sorted(unknown)}")
        return cls(**d)


def projection_id(dataset_id: str, technique: str, params: ProjectionParams, seed: int) -> str:
    """Opaque, deterministic 12-hex-digit id prefixed with 'p'."""
    payload = json.dumps(
        {"dataset": dataset_id, "technique": technique, "params": params.to_dict(), "seed": seed},
        sort_keys=True,
    )
    return "p" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class Projection:
    """An n-by-2 layout of a dataset plus everything needed to regenerate it."""

    id: str
    dataset_id: str
    technique: str
    params: ProjectionParams
    coords: np.ndarray
    seed: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.technique not in TECHNIQUES:
            raise ValueError(f"unknown technique {self.technique!r}")
        self.params.validate_for(self.technique)
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must be n-by-2, got shape {coords.shape}")
        if not np.isfinite(coords).all():
            raise ValueError("coords contain non-finite values")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed out of 64-bit range: {self.seed}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite: {self.scale}")
        object.__setattr__(self, "coords", _readonly(coords))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def rescaled(self, s: float) -> "Projection":
        """Same projection with coords uniformly multiplied by s."""
        if not (math.isfinite(s) and s > 0):
            raise ValueError(f"scale factor must be positive and finite: {s}")
        return replace(self, coords=self.coords * s, scale=self.scale * s)

    def sidecar(self) -> dict:
        return {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "technique": self.technique,
            "params": self.params.to_dict(),
            "seed": self.seed,
            "scale": self.scale,
        }


def save_projection(projection: Projection, directory: str) -> str:
    """Write <id>.csv (x,y rows) and <id>.json (provenance); returns the csv path."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, f"{projection.id}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in projection.coords:
            writer.writerow([repr(float(x)), repr(float(y))])
    with open(os.path.join(directory, f"{projection.id}.json"), "w") as fh:
        json.dump(projection.sidecar(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def _read_xy_csv(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise DataError(f"projection file not found: {path}")
    rows: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: expected 2 columns at line {lineno}, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise DataError(f"{path}: non-numeric cell at line {lineno}") from None
    if not rows:
        raise DataError(f"{path}: no coordinate rows")
    coords = np.array(rows, dtype=np.float64)
    if not np.isfinite(coords).all():
        raise DataError(f"{path}: non-finite coordinates")
    return coords


def load_projection(directory: str, projection_id_: str) -> Projection:
    """Rebuild a Projection from its <id>.csv / <id>.json pair."""
    json_path = os.path.join(directory, f"{projection_id_}.json")
    if not os.path.exists(json_path):
        raise DataError(f"projection sidecar not found: {json_path}")
    with open(json_path) as fh:
        meta = json.load(fh)
    coords = _read_xy_csv(os.path.join(directory, f"{projection_id_}.csv"))
    return Projection(
        id=meta["id"],
        dataset_id=meta["dataset_id"],
        technique=meta["technique"],
        params=ProjectionParams.from_dict(meta.get("params", {})),
        coords=coords,
        seed=int(meta["seed"]),
        scale=float(meta.get("scale", 1.0)),
    )


def import_projection(path: str, dataset: Dataset) -> Projection:
    """Wrap an externally produced x,y CSV as an imported projection."""
    coords = _read_xy_csv(path)
    if coords.shape[0] != dataset.n:
        raise DataError(
            f"{path}: {coords.shape[0]} rows but dataset {dataset.id!r} has {dataset.n} points"
        )
    digest = hashlib.sha256(coords.tobytes() + dataset.id.encode("utf-8")).hexdigest()
    return Projection(
        id="p" + digest[:12],
        dataset_id=dataset.id,
        technique="imported",
        params=ProjectionParams(),
        coords=coords,
        seed=0,
        scale=1.0,
    )
