"""Sweep orchestration: generate projections, score them, pick winners.

A sweep crosses datasets, techniques, a 10-point parameter grid per
technique, and one or more master seeds. Every cell gets its own derived
seed so it can be reproduced in isolation, and every stored layout is
rescaled to its stress-minimizing scale (the closed form from scaleopt)
so stress values are comparable across techniques whose raw coordinate
magnitudes differ by orders of magnitude. Cell failures are recorded and
skipped, never fatal.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .datasets import (
    DataError,
    Dataset,
    DistanceMatrix,
    pairwise_distances,
    resolve_dataset,
    standardize,
    subsample,
)
from .learning import (
    MaeHistogram,
    RegressionModel,
    TrainingRow,
    TrainingSet,
    predict_rating,
)
from .metrics import MetricVector, evaluate_projection
from .projections import Projection, load_projection, save_projection
from .projectors import lamp, tsne, umap
from .scaleopt import closed_form_stress_scale, search_scale
from .seeding import derive_seed

DEFAULT_DATASETS = ("iris", "wine", "digits", "breast_cancer")
DEFAULT_TSNE_PERPLEXITIES = tuple(float(p) for p in range(5, 55, 5))
DEFAULT_FRACTIONS = tuple(round(0.1 * i, 2) for i in range(1, 11))
TECHNIQUES = ("tsne", "umap", "lamp")
DEFAULT_NP_K = 7

PROJECTIONS_SUBDIR = "projections"
MANIFEST_NAME = "run.json"
FAILURES_NAME = "failures.json"
METRICS_NAME = "metrics.csv"


@dataclass(frozen=True)
class SweepConfig:
    datasets: tuple[str, ...] = DEFAULT_DATASETS
    tsne_perplexities: tuple[float, ...] = DEFAULT_TSNE_PERPLEXITIES
    umap_neighbor_fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    lamp_control_fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    seeds: tuple[int, ...] = (0,)
    np_k: int = DEFAULT_NP_K
    subsample: int | None = None
    normalize_scale: bool = True

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ValueError("config needs at least one dataset")
        if not self.seeds:
            raise ValueError("config needs at least one seed")
        for name in ("tsne_perplexities", "umap_neighbor_fractions", "lamp_control_fractions"):
            if not getattr(self, name):
                raise ValueError(f"config grid {name} is empty")
        if self.np_k < 1:
            raise ValueError(f"np_k must be >= 1, got {self.np_k}")

    def grid_for(self, technique: str) -> tuple[float, ...]:
        return {
            "tsne": self.tsne_perplexities,
            "umap": self.umap_neighbor_fractions,
            "lamp": self.lamp_control_fractions,
        }[technique]

    def to_dict(self) -> dict:
        return {
            "datasets": list(self.datasets),
            "tsne_perplexities": list(self.tsne_perplexities),
            "umap_neighbor_fractions": list(self.umap_neighbor_fractions),
            "lamp_control_fractions": list(self.lamp_control_fractions),
            "seeds": list(self.seeds),
            "np_k": self.np_k,
            "subsample": self.subsample,
            "normalize_scale": self.normalize_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown sweep config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for name in (
            "datasets",
            "tsne_perplexities",
            "umap_neighbor_fractions",
            "lamp_control_fractions",
            "seeds",
        ):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "SweepConfig":
        if not os.path.exists(path):
            raise DataError(f"config file not found: {path}")
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON in {path}: {exc}") from None
        return cls.from_dict(data)


def load_sweep_datasets(config: SweepConfig) -> dict[str, Dataset]:
    """Standardized (and optionally subsampled) datasets keyed by id."""
    out: dict[str, Dataset] = {}
    for ref in config.datasets:
        ds = standardize(resolve_dataset(ref))
        if config.subsample is not None and ds.n > config.subsample:
            ds = subsample(ds, config.subsample, derive_seed(config.seeds[0], "subsample", ds.id))
        out[ds.id] = ds
    return out


def _run_cell(ds: Dataset, technique: str, value: float, seed: int) -> Projection:
    if technique == "tsne":
        # the sweep grid tops out above what small datasets admit; clamp
        # to the precondition limit so every cell still produces a layout
        limit = (ds.n - 1) / 3.0
        return tsne(ds, min(float(value), limit), seed)
    if technique == "umap":
        k = int(np.clip(round(value * ds.n), 2, ds.n - 1))
        return umap(ds, k, seed, neighbor_fraction=float(value))
    if technique == "lamp":
        return lamp(ds, float(value), seed)
    raise ValueError(f"unknown technique {technique!r}")


def _execute_cell(
    ds: Dataset,
    d_high: DistanceMatrix | None,
    technique: str,
    value: float,
    seed: int,
) -> tuple[Projection | None, dict | None]:
    try:
        proj = _run_cell(ds, technique, value, seed)
        if d_high is not None:
            s = closed_form_stress_scale(d_high, pairwise_distances(proj.coords))
            proj = proj.rescaled(s)
        return proj, None
    except Exception as exc:  # cell isolation by contract
        return None, {
            "dataset": ds.id,
            "technique": technique,
            "param": float(value),
            "seed": seed,
            "error": f"{type(exc).__name__}: {exc}",
        }


def run_sweep(config: SweepConfig, out_dir: str, workers: int = 1) -> list[Projection]:
    """Generate, normalize, and persist all sweep-cell projections.

    Returns the successful projections; per-cell failures go into
    failures.json and do not stop the sweep. A manifest with the config
    is written so later stages can reload identical datasets. Cells are
    independent; with workers > 1 they run on a thread pool (the numeric
    kernels release the GIL) and results keep the serial order.
    """
    proj_dir = os.path.join(out_dir, PROJECTIONS_SUBDIR)
    os.makedirs(proj_dir, exist_ok=True)
    datasets = load_sweep_datasets(config)

    tasks = []
    for dataset_id, ds in datasets.items():
        d_high = pairwise_distances(ds.features) if config.normalize_scale else None
        for technique in TECHNIQUES:
            for param_index, value in enumerate(config.grid_for(technique)):
                for master in config.seeds:
                    seed = derive_seed(master, dataset_id, technique, param_index)
                    tasks.append((ds, d_high, technique, float(value), seed))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _execute_cell(*t), tasks))
    else:
        results = [_execute_cell(*t) for t in tasks]

    projections: list[Projection] = []
    failures: list[dict] = []
    for proj, failure in results:
        if proj is not None:
            save_projection(proj, proj_dir)
            projections.append(proj)
        else:
            failures.append(failure)

    manifest = {
        "config": config.to_dict(),
        "datasets": {
            ds.id: {"source": ds.source, "n": ds.n, "d": ds.d, "classes": ds.n_classes}
            for ds in datasets.values()
        },
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, FAILURES_NAME), "w") as fh:
        json.dump(failures, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return projections


def load_run_config(run_dir: str) -> SweepConfig:
    path = os.path.join(run_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise DataError(f"no run manifest at {path}; run `generate` first")
    with open(path) as fh:
        manifest = json.load(fh)
    return SweepConfig.from_dict(manifest["config"])


def load_run_datasets(run_dir: str) -> dict[str, Dataset]:
    return load_sweep_datasets(load_run_config(run_dir))


def load_run_projections(run_dir: str) -> list[Projection]:
    proj_dir = os.path.join(run_dir, PROJECTIONS_SUBDIR)
    if not os.path.isdir(proj_dir):
        raise DataError(f"no projections directory at {proj_dir}")
    ids = sorted(
        name[: -len(".json")] for name in os.listdir(proj_dir) if name.endswith(".json")
    )
    return [load_projection(proj_dir, pid) for pid in ids]


def primary_param(projection: Projection) -> tuple[str, float]:
    """The swept parameter of a projection, for table keys and tie-breaks."""
    p = projection.params
    if projection.technique == "tsne":
        return "perplexity", float(p.perplexity)
    if projection.technique == "umap":
        if p.neighbor_fraction is not None:
            return "neighbor_fraction", float(p.neighbor_fraction)
        return "n_neighbors", float(p.n_neighbors)
    if projection.technique == "lamp":
        return "control_fraction", float(p.control_fraction)
    return "", 0.0


@dataclass(frozen=True)
class MetricRow:
    projection_id: str
    dataset_id: str
    technique: str
    param_name: str
    param_value: float
    seed: int
    scale: float
    metric: MetricVector

    def sort_key(self) -> tuple:
        return (
            self.dataset_id,
            self.technique,
            self.param_value,
            self.seed,
            self.projection_id,
        )


_METRIC_CSV_HEADER = (
    "projection_id",
    "dataset",
    "technique",
    "param_name",
    "param_value",
    "seed",
    "scale",
    "sc",
    "stress",
    "np",
    "np_k",
)


@dataclass(frozen=True)
class MetricTable:
    rows: tuple[MetricRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def by_id(self) -> dict[str, MetricRow]:
        return {r.projection_id: r for r in self.rows}

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_METRIC_CSV_HEADER)
            for r in self.rows:
                m = r.metric
                writer.writerow(
                    [
                        r.projection_id,
                        r.dataset_id,
                        r.technique,
                        r.param_name,
                        repr(r.param_value),
                        str(r.seed),
                        repr(r.scale),
                        repr(m.sc),
                        repr(m.stress),
                        repr(m.np),
                        str(m.np_k),
                    ]
                )

    @classmethod
    def from_csv(cls, path: str) -> "MetricTable":
        if not os.path.exists(path):
            raise DataError(f"metric table not found: {path}; run `evaluate` first")
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(_METRIC_CSV_HEADER) - set(reader.fieldnames or ())
            if missing:
                raise DataError(f"{path}: missing columns {sorted(missing)}")
            for rec in reader:
                rows.append(
                    MetricRow(
                        projection_id=rec["projection_id"],
                        dataset_id=rec["dataset"],
                        technique=rec["technique"],
                        param_name=rec["param_name"],
                        param_value=float(rec["param_value"]),
                        seed=int(rec["seed"]),
                        scale=float(rec["scale"]),
                        metric=MetricVector(
                            sc=float(rec["sc"]),
                            stress=float(rec["stress"]),
                            np=float(rec["np"]),
                            np_k=int(rec["np_k"]),
                        ),
                    )
                )
        return cls(rows=tuple(sorted(rows, key=MetricRow.sort_key)))


def evaluate_all(
    projections: list[Projection],
    datasets: dict[str, Dataset],
    np_k: int,
) -> tuple[MetricTable, list[dict]]:
    """Score every projection; rows that cannot be scored come back as errors."""
    distance_cache: dict[str, DistanceMatrix] = {}
    rows: list[MetricRow] = []
    errors: list[dict] = []
    for proj in projections:
        ds = datasets.get(proj.dataset_id)
        if ds is None:
            errors.append({"projection_id": proj.id, "error": f"unknown dataset {proj.dataset_id!r}"})
            continue
        if proj.n != ds.n:
            errors.append(
                {
                    "projection_id": proj.id,
                    "error": f"{proj.n} coords for dataset {ds.id!r} with {ds.n} points",
                }
            )
            continue
        if ds.id not in distance_cache:
            distance_cache[ds.id] = pairwise_distances(ds.features)
        metric = evaluate_projection(distance_cache[ds.id], proj.coords, ds.labels, np_k)
        name, value = primary_param(proj)
        rows.append(
            MetricRow(
                projection_id=proj.id,
                dataset_id=proj.dataset_id,
                technique=proj.technique,
                param_name=name,
                param_value=value,
                seed=proj.seed,
                scale=proj.scale,
                metric=metric,
            )
        )
    return MetricTable(rows=tuple(sorted(rows, key=MetricRow.sort_key))), errors


@dataclass(frozen=True)
class SelectionRow:
    dataset_id: str
    technique: str
    projection_id: str
    params: dict
    param_name: str
    param_value: float
    seed: int
    q_at_unit_scale: float
    q_at_optimal_scale: float
    scale: float
    at_boundary: bool

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "technique": self.technique,
            "projection_id": self.projection_id,
            "params": self.params,
            "param_name": self.param_name,
            "param_value": self.param_value,
            "seed": self.seed,
            "q_at_unit_scale": self.q_at_unit_scale,
            "q_at_optimal_scale": self.q_at_optimal_scale,
            "scale": self.scale,
            "at_boundary": self.at_boundary,
        }


@dataclass(frozen=True)
class SelectionReport:
    user_id: str
    scale_opt: bool
    rows: tuple[SelectionRow, ...]

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "scale_opt": self.scale_opt,
            "rows": [r.to_dict() for r in self.rows],
        }


def _load_sidecar_params(proj_dir: str, projection_id: str) -> dict:
    path = os.path.join(proj_dir, f"{projection_id}.json")
    if not os.path.exists(path):
        return {}
    with open(path) as fh:
        return json.load(fh).get("params", {})


def select_best(
    table: MetricTable,
    model: RegressionModel,
    *,
    user_id: str = "",
    scale_opt: bool = True,
    run_dir: str | None = None,
) -> SelectionReport:
    """Per (dataset, technique), the row maximizing the predicted rating.

    With scale_opt on, each candidate is re-scored at its composite-
    maximizing scale before the argmax; this needs the stored coordinates,
    hence the run directory. Ties go to the smaller parameter value, then
    the smaller seed.
    """
    if not table.rows:
        raise DataError("metric table is empty")
    if scale_opt and run_dir is None:
        raise ValueError("scale_opt requires run_dir to reload coordinates")

    datasets = load_run_datasets(run_dir) if scale_opt else {}
    distance_cache: dict[str, DistanceMatrix] = {}
    proj_dir = os.path.join(run_dir, PROJECTIONS_SUBDIR) if run_dir else ""

    scored: list[SelectionRow] = []
    for row in table.rows:
        q_unit = predict_rating(model, row.metric)
        q_opt = q_unit
        scale = 1.0
        at_boundary = False
        params = _load_sidecar_params(proj_dir, row.projection_id) if run_dir else {}
        if scale_opt:
            ds = datasets.get(row.dataset_id)
            if ds is None:
                raise DataError(f"run has no dataset {row.dataset_id!r} for {row.projection_id}")
            if ds.id not in distance_cache:
                distance_cache[ds.id] = pairwise_distances(ds.features)
            proj = load_projection(proj_dir, row.projection_id)
            done = search_scale(
                distance_cache[ds.id], pairwise_distances(proj.coords), model.weights
            )
            base = q_unit - model.weights.w3 * row.metric.stress
            q_opt = base + done.result_q
            scale = done.result_s
            at_boundary = done.at_boundary
        scored.append(
            SelectionRow(
                dataset_id=row.dataset_id,
                technique=row.technique,
                projection_id=row.projection_id,
                params=params,
                param_name=row.param_name,
                param_value=row.param_value,
                seed=row.seed,
                q_at_unit_scale=q_unit,
                q_at_optimal_scale=q_opt,
                scale=scale,
                at_boundary=at_boundary,
            )
        )

    groups: dict[tuple[str, str], list[SelectionRow]] = {}
    for s in scored:
        groups.setdefault((s.dataset_id, s.technique), []).append(s)

    best_rows = []
    for key in sorted(groups):
        candidates = groups[key]
        objective = (lambda r: r.q_at_optimal_scale) if scale_opt else (lambda r: r.q_at_unit_scale)
        best_rows.append(
            min(candidates, key=lambda r: (-objective(r), r.param_value, r.seed))
        )
    return SelectionReport(user_id=user_id, scale_opt=scale_opt, rows=tuple(best_rows))


def training_from_ratings(
    user_id: str,
    latest_ratings: dict[str, float],
    table: MetricTable,
) -> TrainingSet:
    """Join a user's latest ratings with metric rows into a training set."""
    by_id = table.by_id()
    missing = sorted(set(latest_ratings) - set(by_id))
    if missing:
        raise DataError(
            f"{len(missing)} rated projections have no metric row "
            f"(first: {missing[0]}); re-run `evaluate` on this run"
        )
    rows = tuple(
        TrainingRow(
            metric=by_id[pid].metric,
            rating=float(latest_ratings[pid]),
            projection_id=pid,
        )
        for pid in sorted(latest_ratings)
    )
    return TrainingSet(user_id=user_id, rows=rows)


@dataclass(frozen=True)
class UserReport:
    user_id: str
    model: RegressionModel
    selection: SelectionReport
    histogram: MaeHistogram | None
    n_ratings: int


def selection_table_lines(report: SelectionReport) -> list[str]:
    lines = [
        "| dataset | technique | projection | param | seed | Q(s=1) | Q(s*) | s* | at boundary |",
        "| --- | --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for r in report.rows:
        lines.append(
            f"| {r.dataset_id} | {r.technique} | {r.projection_id} "
            f"| {r.param_name}={r.param_value:g} | {r.seed} "
            f"| {r.q_at_unit_scale:.6f} | {r.q_at_optimal_scale:.6f} "
            f"| {r.scale:.6f} | {'yes' if r.at_boundary else 'no'} |"
        )
    return lines


def emit_report(out_dir: str, table: MetricTable, users: list[UserReport]) -> str:
    """Write report.md plus machine-readable companions; returns report path."""
    os.makedirs(out_dir, exist_ok=True)
    table.to_csv(os.path.join(out_dir, METRICS_NAME))

    datasets = sorted({r.dataset_id for r in table.rows})
    lines = [
        "# Projection workbench report",
        "",
        "## Sweep metrics",
        "",
        f"{len(table)} scored projections across datasets: {', '.join(datasets)}.",
        f"Full table: {METRICS_NAME}.",
        "",
    ]
    if not users:
        lines += ["No ratings available; no models were fitted.", ""]
    for user in sorted(users, key=lambda u: u.user_id):
        model = user.model
        with open(os.path.join(out_dir, f"model_{user.user_id}.json"), "w") as fh:
            json.dump({"user_id": user.user_id, **model.to_dict()}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, f"selection_{user.user_id}.json"), "w") as fh:
            json.dump(user.selection.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

        w = model.weights
        fmt = lambda v: "n/a" if v is None else f"{v:.6f}"
        lines += [
            f"## User {user.user_id}",
            "",
            f"Model: {model.kind} (lambda={model.lambda_:g}), "
            f"cv_rmse={fmt(model.cv_rmse)}, test_rmse={fmt(model.test_rmse)}, "
            f"test_mae={fmt(model.test_mae)}.",
            f"Weights: w1={w.w1:.6f}, w2={w.w2:.6f}, w3={w.w3:.6f}, w4={w.w4:.6f}.",
            f"Ratings used: {user.n_ratings}.",
            "",
            "### Best projections",
            "",
        ]
        lines += selection_table_lines(user.selection)
        lines.append("")
        if user.histogram is not None:
            hist_name = f"mae_hist_{user.user_id}.csv"
            with open(os.path.join(out_dir, hist_name), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_start", "bin_end", "count"])
                for lo, hi, count in user.histogram.to_rows():
                    writer.writerow([repr(lo), repr(hi), str(count)])
            lines += [f"Held-out absolute error histogram: {hist_name}.", ""]

    report_path = os.path.join(out_dir, "report.md")
    with open(report_path, "w") as fh:
        fh.write("\n".join(lines))
    return report_path
