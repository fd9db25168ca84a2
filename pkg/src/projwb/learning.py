"""Learn per-user composite weights from rated projections.

Ratings are modeled as an affine function of the three metrics. Three
estimators are offered: ordinary least squares, ridge (quadratic penalty
on the non-bias weights) and lasso (L1 penalty, coordinate descent on
standardized columns). ``select_model`` runs the experiment's protocol:
hold out 20% of rows, tune each estimator by 5-fold cross-validation on
the rest, keep the one with lowest CV error, and report held-out RMSE/MAE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .metrics import MetricVector, WeightVector, composite

COLUMN_NAMES = ("bias", "sc", "stress", "np")
MODEL_KINDS = ("ols", "ridge", "lasso")

# lambda grid used by select_model for the penalized estimators
LAMBDA_GRID = tuple(float(x) for x in np.logspace(-3.0, 3.0, 13))

MIN_FIT_ROWS = 8
LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 10_000


class FitError(RuntimeError):
    """A regression fit could not be carried out."""


@dataclass(frozen=True)
class TrainingRow:
    metric: MetricVector
    rating: float
    projection_id: str

    def __post_init__(self) -> None:
        if not 1.0 <= self.rating <= 5.0:
            raise ValueError(f"rating out of [1, 5]: {self.rating}")


@dataclass(frozen=True)
class TrainingSet:
    """One user's (metrics, rating) rows, ready to fit."""

    user_id: str
    rows: tuple[TrainingRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def design(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) with X columns (sc, stress, np); the bias is added by the fits."""
        X = np.array([[r.metric.sc, r.metric.stress, r.metric.np] for r in self.rows])
        y = np.array([r.rating for r in self.rows])
        return X, y


@dataclass(frozen=True)
class RegressionModel:
    kind: str
    weights: WeightVector
    lambda_: float
    cv_rmse: float | None = None
    test_rmse: float | None = None
    test_mae: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be >= 0: {self.lambda_}")
        if self.kind == "ols" and self.lambda_ != 0.0:
            raise ValueError("ols models have lambda 0")
        for name in ("cv_rmse", "test_rmse", "test_mae"):
            value = getattr(self, name)
            if value is not None and not value >= 0.0:
                raise ValueError(f"{name} must be >= 0: {value}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lambda_,
            **self.weights.to_dict(),
            "cv_rmse": self.cv_rmse,
            "test_rmse": self.test_rmse,
            "test_mae": self.test_mae,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        try:
            weights = WeightVector(
                w1=float(d["w1"]), w2=float(d["w2"]), w3=float(d["w3"]), w4=float(d["w4"])
            )
            return cls(
                kind=d["kind"],
                weights=weights,
                lambda_=float(d["lambda"]),
                cv_rmse=None if d.get("cv_rmse") is None else float(d["cv_rmse"]),
                test_rmse=None if d.get("test_rmse") is None else float(d["test_rmse"]),
                test_mae=None if d.get("test_mae") is None else float(d["test_mae"]),
            )
        except KeyError as exc:
            raise ValueError(f"model dict missing key {exc.args[0]!r}") from None


def _as_design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError(f"design matrix must be m-by-3, got {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"{y.shape[0] if y.ndim else 0} ratings for {X.shape[0]} rows")
    if X.shape[0] < MIN_FIT_ROWS:
        raise FitError(f"need at least {MIN_FIT_ROWS} rows to fit, got {X.shape[0]}")
    return X, y


def _with_bias(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


def _check_rank(Xb: np.ndarray) -> None:
    """Raise FitError naming columns linearly dependent on earlier ones."""
    if np.linalg.matrix_rank(Xb) == Xb.shape[1]:
        return
    kept: list[int] = []
    dependent: list[str] = []
    for j in range(Xb.shape[1]):
        if np.linalg.matrix_rank(Xb[:, kept + [j]]) > len(kept):
            kept.append(j)
        else:
            dependent.append(COLUMN_NAMES[j])
    raise FitError(f"rank-deficient design: column(s) {', '.join(dependent)} are collinear")


def _weights(w: np.ndarray) -> WeightVector:
    return WeightVector(w1=float(w[0]), w2=float(w[1]), w3=float(w[2]), w4=float(w[3]))


def fit_ols(X: np.ndarray, y: np.ndarray) -> RegressionModel:
    """Least squares on (1, sc, stress, np); errors on a rank-deficient design."""
    X, y = _as_design(X, y)
    Xb = _with_bias(X)
    _check_rank(Xb)
    w, _, _, _ = np.linalg.lstsq(Xb, y, rcond=None)
    return RegressionModel(kind="ols", weights=_weights(w), lambda_=0.0)


def fit_ridge(X: np.ndarray, y: np.ndarray, lambda_: float) -> RegressionModel:
    """Minimize ||y - Xw||^2 + lambda * ||w_2..4||^2 (bias unpenalized)."""
    if lambda_ < 0:
        raise ValueError(f"lambda must be >= 0: {lambda_}")
    X, y = _as_design(X, y)
    Xb = _with_bias(X)
    penalty = np.diag([0.0, 1.0, 1.0, 1.0]) * lambda_
    w = np.linalg.solve(Xb.T @ Xb + penalty, Xb.T @ y)
    return RegressionModel(kind="ridge", weights=_weights(w), lambda_=float(lambda_))


def _standardize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return (X - mu) / sigma, mu, sigma


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def fit_lasso(X: np.ndarray, y: np.ndarray, lambda_: float) -> RegressionModel:
    """Minimize 0.5 * ||y - Xw||^2 + lambda * ||beta||_1 by coordinate descent.

    The descent runs on z-scored columns with an unpenalized bias, so
    lambda means the same thing for all three metrics; the returned weights
    are mapped back to the original column scale. With this objective the
    non-bias weights vanish exactly once lambda >= max_j |X_j^T (y - mean(y))|
    over the standardized columns.
    """
    if lambda_ < 0:
        raise ValueError(f"lambda must be >= 0: {lambda_}")
    X, y = _as_design(X, y)
    Xs, mu, sigma = _standardize_columns(X)
    y_mean = float(y.mean())
    yc = y - y_mean

    m, p = Xs.shape
    col_sq = (Xs * Xs).sum(axis=0)  # = m for non-constant columns
    beta = np.zeros(p)
    residual = yc.copy()
    for _ in range(LASSO_MAX_SWEEPS):
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            rho = float(Xs[:, j] @ residual) + beta[j] * col_sq[j]
            new = soft_threshold(rho, lambda_) / col_sq[j]
            change = new - beta[j]
            if change != 0.0:
                residual -= change * Xs[:, j]
                beta[j] = new
                max_change = max(max_change, abs(change))
        if max_change < LASSO_TOL:
            break
    else:
        raise FitError(f"lasso did not converge within {LASSO_MAX_SWEEPS} sweeps")

    w = beta / sigma
    bias = y_mean - float(w @ mu)
    return RegressionModel(
        kind="lasso",
        weights=WeightVector(w1=bias, w2=float(w[0]), w3=float(w[1]), w4=float(w[2])),
        lambda_=float(lambda_),
    )


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lambda at which every non-bias lasso weight is exactly zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Xs, _, _ = _standardize_columns(X)
    return float(np.abs(Xs.T @ (y - y.mean())).max())


def _fit(kind: str, X: np.ndarray, y: np.ndarray, lambda_: float) -> RegressionModel:
    if kind == "ols":
        return fit_ols(X, y)
    if kind == "ridge":
        return fit_ridge(X, y, lambda_)
    if kind == "lasso":
        return fit_lasso(X, y, lambda_)
    raise ValueError(f"unknown model kind {kind!r}")


def _predict_matrix(model: RegressionModel, X: np.ndarray) -> np.ndarray:
    return _with_bias(np.asarray(X, dtype=np.float64)) @ model.weights.as_array()


def fold_indices(m: int, folds: int, seed: int) -> list[np.ndarray]:
    """Disjoint, exhaustive, seeded partition of range(m) into `folds` parts."""
    order = np.random.default_rng(seed).permutation(m)
    return [part for part in np.array_split(order, folds)]


def cross_validate(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    folds: int,
    lambda_grid,
    seed: int = 0,
) -> tuple[float, float]:
    """(best_lambda, cv_rmse): mean held-out RMSE per lambda, ties to larger lambda."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    m = X.shape[0]
    if not 2 <= folds <= m:
        raise ValueError(f"folds must be in [2, {m}], got {folds}")
    parts = fold_indices(m, folds, seed)
    mask = np.ones(m, dtype=bool)

    best_lambda = math.nan
    best_rmse = math.inf
    for lam in grid:
        fold_rmses = []
        for held in parts:
            if held.size == 0:
                continue
            mask[:] = True
            mask[held] = False
            model = _fit(kind, X[mask], y[mask], lam)
            err = _predict_matrix(model, X[held]) - y[held]
            fold_rmses.append(float(np.sqrt(np.mean(err * err))))
        rmse = float(np.mean(fold_rmses))
        if rmse < best_rmse or (rmse == best_rmse and lam > best_lambda):
            best_lambda, best_rmse = lam, rmse
    return best_lambda, best_rmse


def train_test_split(m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle; first floor(0.8 m) indices train, rest test."""
    order = np.random.default_rng(seed).permutation(m)
    n_train = int(math.floor(0.8 * m))
    return order[:n_train], order[n_train:]


def select_model(training: TrainingSet, split_seed: int) -> RegressionModel:
    """The experiment's protocol: 80/20 split, 5-fold CV per kind, best kind wins.

    CV ties within 1e-6 go to the simpler kind (ols, then ridge, then
    lasso). The winner is refit on the full training split and scored on
    the untouched 20%.
    """
    X, y = training.design()
    m = len(training)
    # every CV fit sees floor(0.8 m) minus the largest fold; demand MIN_FIT_ROWS there
    m_cv = int(math.floor(0.8 * m))
    if m_cv - math.ceil(m_cv / 5) < MIN_FIT_ROWS:
        raise FitError(
            f"model selection needs at least 13 ratings so every "
            f"cross-validation fit sees {MIN_FIT_ROWS} rows; got {m}"
        )
    train_idx, test_idx = train_test_split(len(training), split_seed)
    X_train, y_train = X[train_idx], y[train_idx]
    X_test, y_test = X[test_idx], y[test_idx]

    best: tuple[str, float, float] | None = None  # (kind, lambda, cv_rmse)
    for kind in MODEL_KINDS:
        grid = (0.0,) if kind == "ols" else LAMBDA_GRID
        try:
            lam, cv_rmse = cross_validate(
                kind, X_train, y_train, 5, grid, seed=split_seed
            )
        except FitError:
            # a kind that cannot be fitted (rank-deficient OLS, stalled
            # lasso) drops out of the competition instead of aborting it
            continue
        if best is None or cv_rmse < best[2] - 1e-6:
            best = (kind, lam, cv_rmse)

    if best is None:
        raise FitError("no model kind could be fitted on this training set")
    kind, lam, cv_rmse = best
    model = _fit(kind, X_train, y_train, lam)
    err = _predict_matrix(model, X_test) - y_test
    return replace(
        model,
        cv_rmse=cv_rmse,
        test_rmse=float(np.sqrt(np.mean(err * err))),
        test_mae=float(np.mean(np.abs(err))),
    )


def predict_rating(model: RegressionModel, m: MetricVector) -> float:
    """Same affine formula as the composite metric, same code path."""
    return composite(m, model.weights)


@dataclass(frozen=True)
class MaeHistogram:
    """Absolute prediction errors binned at fixed width 0.25 starting at 0."""

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def to_rows(self) -> list[tuple[float, float, int]]:
        return [
            (self.bin_edges[i], self.bin_edges[i + 1], self.counts[i])
            for i in range(len(self.counts))
        ]


MAE_BIN_WIDTH = 0.25


def mae_distribution(model: RegressionModel, test_rows) -> MaeHistogram:
    rows = list(test_rows)
    if not rows:
        raise ValueError("mae_distribution needs at least one row")
    errors = np.array([abs(r.rating - predict_rating(model, r.metric)) for r in rows])
    n_bins = max(1, int(math.floor(errors.max() / MAE_BIN_WIDTH)) + 1)
    edges = np.arange(n_bins + 1) * MAE_BIN_WIDTH
    counts, _ = np.histogram(errors, bins=edges)
    return MaeHistogram(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
    )
