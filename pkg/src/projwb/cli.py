"""Command-line entry points.

Workflow: `generate` a sweep into a run directory, `evaluate` it into a
metric table, `serve` it for rating, `learn` a per-user model from the
ratings, then `select` winners or emit a full `report`. External layouts
join a run via `import`.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .datasets import DataError, pairwise_distances
from .harness import (
    METRICS_NAME,
    PROJECTIONS_SUBDIR,
    MetricTable,
    SweepConfig,
    UserReport,
    emit_report,
    selection_table_lines,
    evaluate_all,
    load_run_datasets,
    load_run_projections,
    run_sweep,
    select_best,
    training_from_ratings,
)
from .learning import (
    FitError,
    RegressionModel,
    mae_distribution,
    select_model,
    train_test_split,
)
from .metrics import evaluate_projection
from .projections import import_projection, save_projection
from .rating_store import load_ratings_file


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad arguments; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _metrics_path(run_dir: str) -> str:
    return os.path.join(run_dir, METRICS_NAME)


def _load_table(run_dir: str) -> MetricTable:
    return MetricTable.from_csv(_metrics_path(run_dir))


def cmd_generate(args) -> int:
    config = SweepConfig.from_file(args.config) if args.config else SweepConfig()
    overrides = {}
    if args.datasets:
        overrides["datasets"] = tuple(args.datasets)
    if args.seeds:
        overrides["seeds"] = tuple(args.seeds)
    if args.subsample is not None:
        overrides["subsample"] = args.subsample
    if args.raw_scale:
        overrides["normalize_scale"] = False
    if overrides:
        config = dataclasses.replace(config, **overrides)
    projections = run_sweep(config, args.out, workers=args.workers)
    with open(os.path.join(args.out, "failures.json")) as fh:
        failures = json.load(fh)
    print(f"generated {len(projections)} projections into {args.out}")
    for failure in failures:
        print(
            f"failed cell: {failure['dataset']}/{failure['technique']}"
            f"?param={failure['param']}: {failure['error']}",
            file=sys.stderr,
        )
    return 0


def cmd_evaluate(args) -> int:
    datasets = load_run_datasets(args.run)
    projections = load_run_projections(args.run)
    if args.projection:
        matches = [p for p in projections if p.id == args.projection]
        if not matches:
            raise DataError(f"no projection {args.projection!r} in {args.run}")
        proj = matches[0]
        ds = datasets.get(proj.dataset_id)
        if ds is None:
            raise DataError(f"run has no dataset {proj.dataset_id!r}")
        metric = evaluate_projection(
            pairwise_distances(ds.features), proj.coords, ds.labels, args.k
        )
        print(
            json.dumps(
                {
                    "projection_id": proj.id,
                    "dataset": proj.dataset_id,
                    "technique": proj.technique,
                    **metric.to_dict(),
                },
                sort_keys=True,
                indent=2,
            )
        )
        return 0
    table, errors = evaluate_all(projections, datasets, args.k)
    table.to_csv(_metrics_path(args.run))
    print(f"scored {len(table)} projections into {_metrics_path(args.run)}")
    if errors:
        for err in errors:
            print(f"skipped {err['projection_id']}: {err['error']}", file=sys.stderr)
        return 2
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.run, ratings_dir=args.ratings_dir, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _fit_user(ratings_path: str, run_dir: str, seed: int):
    user_id, latest = load_ratings_file(ratings_path)
    table = _load_table(run_dir)
    training = training_from_ratings(user_id, {k: float(v) for k, v in latest.items()}, table)
    model = select_model(training, split_seed=seed)
    return user_id, training, model, table


def cmd_learn(args) -> int:
    user_id, training, model, _ = _fit_user(args.ratings, args.run, args.seed)
    document = {"user_id": user_id, **model.to_dict()}
    with open(args.out, "w") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    w = model.weights
    print(
        f"user {user_id}: {model.kind} (lambda={model.lambda_:g}) on {len(training)} ratings\n"
        f"  weights: w1={w.w1:.4f} w2={w.w2:.4f} w3={w.w3:.4f} w4={w.w4:.4f}\n"
        f"  cv_rmse={model.cv_rmse:.4f} test_rmse={model.test_rmse:.4f} "
        f"test_mae={model.test_mae:.4f}\n"
        f"  wrote {args.out}"
    )
    return 0


def _load_model_file(path: str) -> tuple[str, RegressionModel]:
    if not os.path.exists(path):
        raise DataError(f"model file not found: {path}")
    with open(path) as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON in {path}: {exc}") from None
    try:
        return document.get("user_id", ""), RegressionModel.from_dict(document)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_select(args) -> int:
    user_id, model = _load_model_file(args.model)
    table = _load_table(args.run)
    report = select_best(
        table,
        model,
        user_id=user_id,
        scale_opt=args.scale_opt == "on",
        run_dir=args.run,
    )
    print("\n".join(selection_table_lines(report)))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    table = _load_table(args.run)
    ratings_dir = args.ratings_dir or os.path.join(args.run, "ratings")
    users = []
    for model_path in args.models:
        user_id, model = _load_model_file(model_path)
        if not user_id:
            raise DataError(f"{model_path}: model file has no user_id")
        ratings_path = os.path.join(ratings_dir, f"ratings_{user_id}.jsonl")
        file_user, latest = load_ratings_file(ratings_path)
        if file_user != user_id:
            raise DataError(f"{ratings_path}: ratings are for {file_user!r}, not {user_id!r}")
        training = training_from_ratings(
            user_id, {k: float(v) for k, v in latest.items()}, table
        )
        selection = select_best(
            table,
            model,
            user_id=user_id,
            scale_opt=args.scale_opt == "on",
            run_dir=args.run,
        )
        _, test_idx = train_test_split(len(training), seed=args.seed)
        histogram = mae_distribution(model, [training.rows[i] for i in test_idx])
        users.append(
            UserReport(
                user_id=user_id,
                model=model,
                selection=selection,
                histogram=histogram,
                n_ratings=len(training),
            )
        )
    path = emit_report(args.out, table, users)
    print(f"wrote {path}")
    return 0


def cmd_import(args) -> int:
    datasets = load_run_datasets(args.run)
    ds = datasets.get(args.dataset)
    if ds is None:
        raise DataError(
            f"run has no dataset {args.dataset!r}; available: {sorted(datasets)}"
        )
    proj = import_projection(args.file, ds)
    save_projection(proj, os.path.join(args.run, PROJECTIONS_SUBDIR))
    print(proj.id)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="projwb", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run a projection sweep into a run directory")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--config", help="JSON sweep config; defaults apply otherwise")
    p.add_argument("--datasets", nargs="+", help="dataset names or CSV paths")
    p.add_argument("--seeds", nargs="+", type=int, help="master seeds")
    p.add_argument("--subsample", type=int, help="cap dataset size")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep cells")
    p.add_argument(
        "--raw-scale",
        action="store_true",
        help="store layouts at native scale instead of the stress-minimizing one",
    )
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score projections into metrics.csv")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--k", type=int, default=7, help="neighborhood size (default 7)")
    p.add_argument("--projection", help="score one projection and print JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="serve projections for blind rating over HTTP")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ratings-dir", help="where rating files go (default <run>/ratings)")
    p.add_argument("--ui", help="static directory with the rating front end")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("learn", help="fit a user model from a ratings file")
    p.add_argument("--ratings", required=True, help="ratings_<user>.jsonl path")
    p.add_argument("--run", default=".", help="run directory with metrics.csv")
    p.add_argument("--out", required=True, help="model JSON output path")
    p.add_argument("--seed", type=int, default=0, help="train/test split seed")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("select", help="pick best projections for a user model")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--model", required=True, help="model JSON from `learn`")
    p.add_argument("--scale-opt", choices=("on", "off"), default="on")
    p.add_argument("--out", help="write the selection as JSON here")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="emit report.md plus machine-readable outputs")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--models", nargs="*", default=[], help="model JSONs from `learn`")
    p.add_argument("--ratings-dir", help="ratings directory (default <run>/ratings)")
    p.add_argument("--seed", type=int, default=0, help="train/test split seed")
    p.add_argument("--scale-opt", choices=("on", "off"), default="on")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("import", help="add an external 2-D layout to a run")
    p.add_argument("--file", required=True, help="CSV with x,y rows")
    p.add_argument("--dataset", required=True, help="dataset id within the run")
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(func=cmd_import)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DataError, FitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
