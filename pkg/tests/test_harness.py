import hashlib
import json
import os

import numpy as np
import pytest

from conftest import MINI_CONFIG, make_blobs
from projwb.datasets import (
    DataError,
    load_builtin,
    pairwise_distances,
    standardize,
)
from projwb.harness import (
    DEFAULT_FRACTIONS,
    DEFAULT_TSNE_PERPLEXITIES,
    MetricRow,
    MetricTable,
    SweepConfig,
    UserReport,
    emit_report,
    evaluate_all,
    load_run_datasets,
    load_run_projections,
    run_sweep,
    select_best,
    selection_table_lines,
    training_from_ratings,
)
from projwb.learning import RegressionModel, mae_distribution, select_model
from projwb.metrics import MetricVector, WeightVector, evaluate_projection
from projwb.projections import Projection, ProjectionParams, import_projection

U_POS = RegressionModel(
    kind="ols", weights=WeightVector(1.0, 2.0, -1.0, 0.5), lambda_=0.0
)


def metric_row(pid, dataset="iris", technique="tsne", value=10.0, seed=0, **metric):
    defaults = dict(sc=0.5, stress=0.4, np=0.7, np_k=7)
    defaults.update(metric)
    return MetricRow(
        projection_id=pid,
        dataset_id=dataset,
        technique=technique,
        param_name="perplexity",
        param_value=value,
        seed=seed,
        scale=1.0,
        metric=MetricVector(**defaults),
    )


def tree_digest(root):
    """One hash over every file in a directory tree, path-ordered."""
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for name in sorted(filenames):
            path = os.path.join(dirpath, name)
            h.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


# --- sweep configuration ---


def test_default_grids_have_ten_points_each():
    config = SweepConfig()
    assert len(DEFAULT_TSNE_PERPLEXITIES) == 10
    assert len(DEFAULT_FRACTIONS) == 10
    assert config.grid_for("tsne") == DEFAULT_TSNE_PERPLEXITIES
    assert config.grid_for("umap") == DEFAULT_FRACTIONS
    assert config.grid_for("lamp") == DEFAULT_FRACTIONS
    assert config.datasets == ("iris", "wine", "digits", "breast_cancer")


def test_config_validation():
    with pytest.raises(ValueError, match="dataset"):
        SweepConfig(datasets=())
    with pytest.raises(ValueError, match="seed"):
        SweepConfig(seeds=())
    with pytest.raises(ValueError, match="tsne_perplexities"):
        SweepConfig(tsne_perplexities=())
    with pytest.raises(ValueError, match="np_k"):
        SweepConfig(np_k=0)


def test_config_dict_round_trip():
    config = MINI_CONFIG
    assert SweepConfig.from_dict(config.to_dict()) == config
    with pytest.raises(DataError, match="unknown"):
        SweepConfig.from_dict({"datasets": ["iris"], "perplexities": [10]})


# --- running sweeps ---


def test_mini_sweep_counts_and_manifest(mini_run):
    run_dir, table = mini_run
    projections = load_run_projections(run_dir)
    # 2 datasets x 3 techniques x 2 grid points x 1 seed
    assert len(projections) == 12
    assert len(table) == 12
    with open(os.path.join(run_dir, "run.json")) as fh:
        manifest = json.load(fh)
    assert manifest["config"]["datasets"] == ["iris", "wine"]
    assert set(manifest["datasets"]) == {"iris", "wine"}
    assert manifest["datasets"]["iris"]["n"] == 150
    with open(os.path.join(run_dir, "failures.json")) as fh:
        assert json.load(fh) == []


def test_sweep_records_failures_and_continues(tmp_path):
    # control_fraction 0.01 of n=150 rounds to 2 controls: lamp must fail,
    # the rest of the sweep must not
    config = SweepConfig(
        datasets=("iris",),
        tsne_perplexities=(10.0,),
        umap_neighbor_fractions=(0.1,),
        lamp_control_fractions=(0.01, 0.3),
        subsample=60,
    )
    run_dir = str(tmp_path / "run")
    projections = run_sweep(config, run_dir)
    assert len(projections) == 3  # tsne + umap + the one valid lamp cell
    with open(os.path.join(run_dir, "failures.json")) as fh:
        failures = json.load(fh)
    assert len(failures) == 1
    assert failures[0]["technique"] == "lamp"
    assert failures[0]["param"] == 0.01
    assert "control" in failures[0]["error"]


def test_sweep_is_reproducible_across_runs_and_workers(tmp_path):
    config = SweepConfig(
        datasets=("iris",),
        tsne_perplexities=(10.0,),
        umap_neighbor_fractions=(0.2,),
        lamp_control_fractions=(0.4,),
        subsample=50,
    )
    digests = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        run_dir = str(tmp_path / name)
        run_sweep(config, run_dir, workers=workers)
        digests.append(tree_digest(run_dir))
    assert digests[0] == digests[1] == digests[2]


def test_sweep_normalizes_stored_scale(mini_run):
    run_dir, table = mini_run
    # normalize_scale stores each layout at its stress-minimizing size,
    # which is never the raw optimizer output for these techniques
    for row in table.rows:
        assert row.scale != 1.0
    datasets = load_run_datasets(run_dir)
    projections = load_run_projections(run_dir)
    by_id = {p.id: p for p in projections}
    row = table.rows[0]
    proj = by_id[row.projection_id]
    assert proj.scale == row.scale


# --- scoring ---


def test_evaluate_all_covers_each_projection_in_order(mini_run):
    run_dir, table = mini_run
    projections = load_run_projections(run_dir)
    assert sorted(r.projection_id for r in table.rows) == sorted(
        p.id for p in projections
    )
    keys = [
        (r.dataset_id, r.technique, r.param_value, r.seed, r.projection_id)
        for r in table.rows
    ]
    assert keys == sorted(keys)


def test_evaluate_all_matches_direct_metric_calls(mini_run):
    run_dir, table = mini_run
    datasets = load_run_datasets(run_dir)
    projections = {p.id: p for p in load_run_projections(run_dir)}
    row = table.rows[3]
    proj = projections[row.projection_id]
    ds = datasets[row.dataset_id]
    m = evaluate_projection(
        pairwise_distances(ds.features),
        proj.coords,
        ds.labels,
        7,
    )
    assert row.metric == m


def test_evaluate_all_reports_mismatches():
    blobs = make_blobs(5, [(0, 0), (4, 4)], spread=0.3, seed=1)
    proj = Projection(
        id="p0",
        dataset_id="elsewhere",
        technique="imported",
        params=ProjectionParams(),
        coords=np.zeros((10, 2)) + np.arange(10)[:, None],
        seed=0,
    )
    table, errors = evaluate_all([proj], {"blobs1": blobs}, 3)
    assert len(table) == 0
    assert len(errors) == 1 and "elsewhere" in errors[0]["error"]

    wrong_n = Projection(
        id="p1",
        dataset_id="blobs1",
        technique="imported",
        params=ProjectionParams(),
        coords=np.arange(8, dtype=np.float64).reshape(4, 2),
        seed=0,
    )
    table, errors = evaluate_all([wrong_n], {"blobs1": blobs}, 3)
    assert len(table) == 0
    assert len(errors) == 1 and "4" in errors[0]["error"]


def test_identity_import_scores_perfectly(tmp_path):
    # a 2-D dataset projected onto itself: stress 0, every neighborhood kept
    flat = make_blobs(8, [(0, 0), (6, 0), (0, 6)], spread=0.5, seed=2)
    path = tmp_path / "identity.csv"
    lines = ["x,y"] + [f"{float(a)!r},{float(b)!r}" for a, b in flat.features]
    path.write_text("\n".join(lines) + "\n")
    proj = import_projection(str(path), flat)
    table, errors = evaluate_all([proj], {flat.id: flat}, 5)
    assert not errors
    m = table.rows[0].metric
    assert m.stress < 1e-12
    assert m.np == 1.0


def test_metric_table_csv_round_trip(tmp_path, mini_run):
    _, table = mini_run
    path = tmp_path / "metrics.csv"
    table.to_csv(str(path))
    again = MetricTable.from_csv(str(path))
    assert again == table

    broken = tmp_path / "broken.csv"
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    header.remove("stress")
    broken.write_text("\n".join([",".join(header)] + lines[1:]) + "\n")
    with pytest.raises(DataError, match="stress"):
        MetricTable.from_csv(str(broken))


# --- selection ---


def test_select_best_single_row_without_scale_opt():
    table = MetricTable(rows=(metric_row("p1"),))
    report = select_best(table, U_POS, user_id="u", scale_opt=False)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.projection_id == "p1"
    assert row.q_at_optimal_scale == row.q_at_unit_scale
    assert row.scale == 1.0 and not row.at_boundary


def test_select_best_picks_argmax_per_cell():
    rows = (
        metric_row("p1", value=10.0, sc=0.2),
        metric_row("p2", value=20.0, sc=0.8),
        metric_row("p3", dataset="wine", value=10.0, sc=0.9),
        metric_row("p4", technique="umap", value=0.1, np=0.95),
    )
    report = select_best(MetricTable(rows=rows), U_POS, scale_opt=False)
    chosen = {(r.dataset_id, r.technique): r.projection_id for r in report.rows}
    assert chosen == {
        ("iris", "tsne"): "p2",
        ("wine", "tsne"): "p3",
        ("iris", "umap"): "p4",
    }
    assert [
        (r.dataset_id, r.technique) for r in report.rows
    ] == sorted((r.dataset_id, r.technique) for r in report.rows)


def test_select_best_bias_shift_does_not_change_winner():
    rows = (
        metric_row("p1", value=10.0, sc=0.2, stress=0.9),
        metric_row("p2", value=20.0, sc=0.6, stress=0.5),
        metric_row("p3", value=30.0, sc=0.4, stress=0.2),
    )
    shifted = RegressionModel(
        kind="ols",
        weights=WeightVector(
            U_POS.weights.w1 + 50.0, U_POS.weights.w2, U_POS.weights.w3, U_POS.weights.w4
        ),
        lambda_=0.0,
    )
    a = select_best(MetricTable(rows=rows), U_POS, scale_opt=False)
    b = select_best(MetricTable(rows=rows), shifted, scale_opt=False)
    assert [r.projection_id for r in a.rows] == [r.projection_id for r in b.rows]
    assert abs(b.rows[0].q_at_unit_scale - a.rows[0].q_at_unit_scale - 50.0) < 1e-12


def test_select_best_ties_break_to_smaller_param_then_seed():
    rows = (
        metric_row("p_high", value=20.0),
        metric_row("p_low", value=10.0),
        metric_row("p_seed1", dataset="wine", value=10.0, seed=1),
        metric_row("p_seed0", dataset="wine", value=10.0, seed=0),
    )
    report = select_best(MetricTable(rows=rows), U_POS, scale_opt=False)
    chosen = {r.dataset_id: r.projection_id for r in report.rows}
    assert chosen == {"iris": "p_low", "wine": "p_seed0"}


def test_select_best_with_scale_opt_never_loses(mini_run):
    run_dir, table = mini_run
    report = select_best(table, U_POS, scale_opt=True, run_dir=run_dir)
    for row in report.rows:
        assert row.q_at_optimal_scale >= row.q_at_unit_scale - 1e-9
        # stored layouts already sit at the stress-minimizing scale and
        # this user dislikes stress, so rescaling cannot help further
        assert abs(row.scale - 1.0) < 1e-6
        assert not row.at_boundary
    assert report.rows[0].params  # sidecar hyperparameters came along


def test_select_best_scale_opt_requires_run_dir():
    table = MetricTable(rows=(metric_row("p1"),))
    with pytest.raises(ValueError, match="run_dir"):
        select_best(table, U_POS, scale_opt=True)


def test_select_best_rejects_empty_table():
    with pytest.raises(DataError, match="empty"):
        select_best(MetricTable(rows=()), U_POS, scale_opt=False)


# --- joining ratings with metrics ---


def test_training_join_uses_latest_ratings(mini_run):
    _, table = mini_run
    ids = [r.projection_id for r in table.rows]
    latest = {ids[0]: 4.0, ids[3]: 2.0, ids[5]: 5.0}
    training = training_from_ratings("u1", latest, table)
    assert len(training) == 3
    by_id = table.by_id()
    for row in training.rows:
        assert row.rating == latest[row.projection_id]
        assert row.metric == by_id[row.projection_id].metric
    assert [r.projection_id for r in training.rows] == sorted(latest)


def test_training_join_rejects_unknown_projection(mini_run):
    _, table = mini_run
    with pytest.raises(DataError, match="pmissing"):
        training_from_ratings("u1", {"pmissing": 3.0}, table)


# --- reports ---


def test_selection_table_lines_shape():
    table = MetricTable(rows=(metric_row("p1"),))
    report = select_best(table, U_POS, user_id="u1", scale_opt=False)
    lines = selection_table_lines(report)
    assert lines[0].startswith("| dataset | technique |")
    assert len(lines) == 2 + len(report.rows)
    assert "| iris | tsne | p1 | perplexity=10 | 0 |" in lines[2]


def test_emit_report_writes_expected_files(tmp_path, mini_run):
    run_dir, table = mini_run
    ids = [r.projection_id for r in table.rows]
    rng = np.random.default_rng(0)
    latest = {pid: float(rng.integers(1, 6)) for pid in ids} | {ids[0]: 5.0}
    training = training_from_ratings("u1", latest, table)
    # 12 rows is below the selection minimum; fit OLS directly instead
    from projwb.learning import fit_ols

    X, y = training.design()
    model = fit_ols(X, y)
    selection = select_best(table, model, user_id="u1", scale_opt=False)
    hist = mae_distribution(model, training.rows)
    user = UserReport(
        user_id="u1", model=model, selection=selection, histogram=hist, n_ratings=12
    )

    out = str(tmp_path / "report")
    emit_report(out, table, [user])
    names = sorted(os.listdir(out))
    assert names == [
        "mae_hist_u1.csv",
        "metrics.csv",
        "model_u1.json",
        "report.md",
        "selection_u1.json",
    ]

    with open(os.path.join(out, "model_u1.json")) as fh:
        model_doc = json.load(fh)
    assert model_doc["user_id"] == "u1"
    assert RegressionModel.from_dict(model_doc) == model

    hist_rows = open(os.path.join(out, "mae_hist_u1.csv")).read().splitlines()
    assert hist_rows[0] == "bin_start,bin_end,count"
    assert sum(int(r.split(",")[2]) for r in hist_rows[1:]) == 12

    body = open(os.path.join(out, "report.md")).read()
    assert "## User u1" in body
    assert "No ratings available" not in body

    # emission is a pure function of its inputs
    before = tree_digest(out)
    emit_report(out, table, [user])
    assert tree_digest(out) == before


def test_emit_report_without_users_notes_absence(tmp_path, mini_run):
    _, table = mini_run
    out = str(tmp_path / "empty_report")
    emit_report(out, table, [])
    body = open(os.path.join(out, "report.md")).read()
    assert "No ratings available; no models were fitted." in body
    assert sorted(os.listdir(out)) == ["metrics.csv", "report.md"]
