import time

import numpy as np
import pytest

from projwb.datasets import Dataset, load_builtin, standardize
from projwb.harness import SweepConfig, evaluate_all, load_run_datasets, load_run_projections, run_sweep

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def iris():
    return standardize(load_builtin("iris"))


@pytest.fixture(scope="session")
def wine():
    return standardize(load_builtin("wine"))


def make_blobs(n_per_class, centers, spread, seed, n_features=None):
    """Gaussian blobs with integer labels, as a Dataset."""
    rng = np.random.default_rng(seed)
    features = []
    labels = []
    for label, center in enumerate(centers):
        center = np.asarray(center, dtype=np.float64)
        features.append(center + rng.normal(0.0, spread, size=(n_per_class, center.size)))
        labels.extend([label] * n_per_class)
    X = np.vstack(features)
    if n_features is not None and n_features != X.shape[1]:
        raise ValueError("centers disagree with n_features")
    return Dataset(
        id=f"blobs{seed}",
        name="synthetic blobs",
        features=X,
        labels=np.array(labels, dtype=np.int64),
        feature_names=tuple(f"f{i}" for i in range(X.shape[1])),
        source="synthetic",
    )


MINI_CONFIG = SweepConfig(
    datasets=("iris", "wine"),
    tsne_perplexities=(10.0, 30.0),
    umap_neighbor_fractions=(0.1, 0.3),
    lamp_control_fractions=(0.3, 0.5),
)


@pytest.fixture(scope="session")
def mini_run(tmp_path_factory):
    """Small two-dataset sweep shared by harness, service, and CLI tests."""
    run_dir = str(tmp_path_factory.mktemp("mini_run"))
    projections = run_sweep(MINI_CONFIG, run_dir)
    datasets = load_run_datasets(run_dir)
    table, errors = evaluate_all(projections, datasets, MINI_CONFIG.np_k)
    assert not errors
    table.to_csv(f"{run_dir}/metrics.csv")
    return run_dir, table


@pytest.fixture(scope="session")
def full_run(tmp_path_factory):
    """The default 120-cell sweep, evaluated; records its own runtime."""
    run_dir = str(tmp_path_factory.mktemp("full_run"))
    config = SweepConfig()
    start = time.perf_counter()
    projections = run_sweep(config, run_dir)
    sweep_seconds = time.perf_counter() - start
    datasets = load_run_datasets(run_dir)
    table, errors = evaluate_all(load_run_projections(run_dir), datasets, config.np_k)
    assert not errors
    table.to_csv(f"{run_dir}/metrics.csv")
    return {
        "run_dir": run_dir,
        "projections": projections,
        "table": table,
        "sweep_seconds": sweep_seconds,
    }
