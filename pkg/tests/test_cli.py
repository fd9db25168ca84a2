import json
import os

import numpy as np
import pytest

from projwb.cli import main
from projwb.harness import MetricTable, load_run_projections
from projwb.metrics import WeightVector, composite
from projwb.rating_store import RatingStore

CLI_CONFIG = {
    "datasets": ["iris", "wine"],
    "tsne_perplexities": [8.0, 12.0, 16.0],
    "umap_neighbor_fractions": [0.2, 0.4],
    "lamp_control_fractions": [0.3, 0.5],
    "subsample": 60,
}
N_CELLS = 2 * (3 + 2 + 2)


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    """A full generate + evaluate + ratings setup driven through main()."""
    base = tmp_path_factory.mktemp("cli")
    config_path = base / "sweep.json"
    config_path.write_text(json.dumps(CLI_CONFIG))
    run_dir = str(base / "run")

    assert main(["generate", "--config", str(config_path), "--out", run_dir]) == 0
    assert main(["evaluate", "--run", run_dir, "--k", "7"]) == 0

    table = MetricTable.from_csv(os.path.join(run_dir, "metrics.csv"))
    rater = WeightVector(2.5, 1.0, -0.5, 0.5)
    store = RatingStore(str(base / "ratings"))
    for row in table.rows:
        score = int(min(max(round(composite(row.metric, rater)), 1), 5))
        store.append("u1", row.projection_id, score)

    return {
        "base": base,
        "run_dir": run_dir,
        "table": table,
        "ratings": store.path_for("u1"),
    }


def test_generate_created_expected_run(cli_run):
    projections = load_run_projections(cli_run["run_dir"])
    assert len(projections) == N_CELLS
    assert len(cli_run["table"]) == N_CELLS
    assert all(p.n == 60 for p in projections)


def test_evaluate_single_projection_matches_table(cli_run, capsys):
    # second, independent scoring path: one projection straight to stdout
    row = cli_run["table"].rows[4]
    code = main(
        ["evaluate", "--run", cli_run["run_dir"], "--projection", row.projection_id]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["projection_id"] == row.projection_id
    assert doc["sc"] == row.metric.sc
    assert doc["stress"] == row.metric.stress
    assert doc["np"] == row.metric.np


def test_learn_select_report_chain(cli_run, capsys):
    base = cli_run["base"]
    run_dir = cli_run["run_dir"]
    model_path = str(base / "model_u1.json")

    assert main(
        ["learn", "--ratings", cli_run["ratings"], "--run", run_dir, "--out", model_path]
    ) == 0
    with open(model_path) as fh:
        model_doc = json.load(fh)
    assert model_doc["user_id"] == "u1"
    assert model_doc["kind"] in ("ols", "ridge", "lasso")
    assert {"lambda", "w1", "w2", "w3", "w4", "cv_rmse", "test_rmse", "test_mae"} <= set(
        model_doc
    )

    selection_path = str(base / "selection_u1.json")
    capsys.readouterr()
    assert main(
        [
            "select",
            "--run",
            run_dir,
            "--model",
            model_path,
            "--scale-opt",
            "on",
            "--out",
            selection_path,
        ]
    ) == 0
    printed = capsys.readouterr().out
    assert "| dataset | technique |" in printed
    with open(selection_path) as fh:
        selection = json.load(fh)
    # one winner per (dataset, technique) cell
    assert len(selection["rows"]) == 6
    cells = {(r["dataset"], r["technique"]) for r in selection["rows"]}
    assert cells == {
        (ds, t) for ds in ("iris", "wine") for t in ("tsne", "umap", "lamp")
    }

    report_dir = str(base / "report")
    assert main(
        [
            "report",
            "--run",
            run_dir,
            "--models",
            model_path,
            "--ratings-dir",
            str(base / "ratings"),
            "--out",
            report_dir,
        ]
    ) == 0
    names = sorted(os.listdir(report_dir))
    assert names == [
        "mae_hist_u1.csv",
        "metrics.csv",
        "model_u1.json",
        "report.md",
        "selection_u1.json",
    ]
    body = open(os.path.join(report_dir, "report.md")).read()
    assert "## User u1" in body


def test_import_round_trips_through_evaluate(cli_run, tmp_path, capsys):
    run_dir = cli_run["run_dir"]
    rng = np.random.default_rng(0)
    layout = tmp_path / "layout.csv"
    rows = ["x,y"] + [f"{float(a)!r},{float(b)!r}" for a, b in rng.normal(size=(60, 2))]
    layout.write_text("\n".join(rows) + "\n")

    capsys.readouterr()
    assert main(["import", "--file", str(layout), "--dataset", "iris", "--run", run_dir]) == 0
    imported_id = capsys.readouterr().out.strip().split()[-1]
    assert imported_id.startswith("p")

    assert main(["evaluate", "--run", run_dir, "--projection", imported_id]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["technique"] == "imported"
    assert 0.0 <= doc["stress"] <= 1.0

    # a layout with the wrong row count is a data error
    short = tmp_path / "short.csv"
    short.write_text("\n".join(rows[:-1]) + "\n")
    assert main(["import", "--file", str(short), "--dataset", "iris", "--run", run_dir]) == 2
    # so is a dataset the run does not contain
    assert main(["import", "--file", str(layout), "--dataset", "digits", "--run", run_dir]) == 2


def test_usage_errors_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["generate"]) == 1  # --out is required
    assert main(["select", "--run", "x"]) == 1  # --model is required
    capsys.readouterr()


def test_help_exits_0(capsys):
    with_help = main(["--help"])
    assert with_help == 0
    assert "generate" in capsys.readouterr().out


def test_data_errors_exit_2(cli_run, tmp_path, capsys):
    assert main(["evaluate", "--run", str(tmp_path / "no_such_run")]) == 2

    bad_config = tmp_path / "bad.json"
    bad_config.write_text("{not json")
    assert main(["generate", "--config", str(bad_config), "--out", str(tmp_path / "r")]) == 2

    unknown_key = tmp_path / "unknown.json"
    unknown_key.write_text(json.dumps({"datasets": ["iris"], "grid": [1]}))
    assert main(["generate", "--config", str(unknown_key), "--out", str(tmp_path / "r")]) == 2

    assert main(["learn", "--ratings", str(tmp_path / "none.jsonl"), "--out", "m.json"]) == 2

    # a rating file that is too small to fit from
    few = tmp_path / "ratings_u2.jsonl"
    lines = [
        json.dumps(
            {
                "user_id": "u2",
                "projection_id": pid,
                "score": 3,
                "submitted_at": "2026-01-01T00:00:00+00:00",
            }
        )
        for pid in [r.projection_id for r in cli_run["table"].rows[:5]]
    ]
    few.write_text("\n".join(lines) + "\n")
    assert main(
        ["learn", "--ratings", str(few), "--run", cli_run["run_dir"], "--out", str(tmp_path / "m.json")]
    ) == 2
    err = capsys.readouterr().err
    assert "13" in err

    bad_model = tmp_path / "model.json"
    bad_model.write_text(json.dumps({"user_id": "u1", "kind": "ols"}))
    assert main(["select", "--run", cli_run["run_dir"], "--model", str(bad_model)]) == 2


def test_serve_with_missing_run_exits_2(tmp_path):
    assert main(["serve", "--run", str(tmp_path / "missing")]) == 2
