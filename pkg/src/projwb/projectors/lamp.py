"""LAMP: local affine maps anchored on a sampled set of control points.

Control points are drawn uniformly without replacement and laid out by
classical metric MDS. Every data point then gets its own orthogonal map,
solved in closed form from an SVD of the weighted cross-covariance between
control features and control layout, with Gaussian weights in the original
feature space. Points that coincide with a control land exactly on that
control's layout position.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from ..datasets import Dataset, pairwise_distances
from ..projections import Projection, ProjectionParams, projection_id


def classical_mds_2d(dist: np.ndarray) -> np.ndarray:
    """Top-2 eigenpairs of the double-centered squared-distance Gram matrix."""
    n = dist.shape[0]
    sq = dist * dist
    centering = np.eye(n) - 1.0 / n
    gram = -0.5 * centering @ sq @ centering
    vals, vecs = scipy.linalg.eigh(gram, subset_by_index=[n - 2, n - 1])
    # eigh returns ascending order; put the dominant direction first
    vals = np.maximum(vals[::-1], 0.0)
    vecs = vecs[:, ::-1].copy()
    for col in range(2):
        v = vecs[:, col]
        if v[np.argmax(np.abs(v))] < 0:
            vecs[:, col] = -v
    return vecs * np.sqrt(vals)


def _control_spacing(control_dist: np.ndarray) -> float:
    """Mean nearest-other-control distance; the Gaussian kernel width h."""
    c = control_dist.shape[0]
    masked = control_dist + np.diag(np.full(c, np.inf))
    h = float(masked.min(axis=1).mean())
    return h if h > 0.0 else 1.0


def lamp(dataset: Dataset, control_fraction: float, seed: int) -> Projection:
    n = dataset.n
    if not 0.0 < control_fraction <= 1.0:
        raise ValueError(f"control_fraction must be in (0, 1], got {control_fraction}")
    n_controls = int(round(control_fraction * n))
    if n_controls < 3:
        raise ValueError(
            f"fewer than 3 control points: fraction {control_fraction} of n={n}"
        )

    rng = np.random.default_rng(seed)
    control_idx = np.sort(rng.choice(n, size=n_controls, replace=False))
    X = dataset.features
    Xc = X[control_idx]
    control_dist = pairwise_distances(Xc).values
    Yc = classical_mds_2d(control_dist)
    h = _control_spacing(control_dist)
    two_h_sq = 2.0 * h * h

    sq = cdist(X, Xc, "sqeuclidean")
    Y = np.empty((n, 2))
    for i in range(n):
        row = sq[i]
        nearest = int(row.argmin())
        if row[nearest] == 0.0 or np.array_equal(X[i], Xc[nearest]):
            Y[i] = Yc[nearest]
            continue
        # shifting by the row minimum rescales all weights by one positive
        # factor, which leaves the weighted fit unchanged but avoids a
        # full underflow for points far from every control
        alpha = np.exp(-(row - row[nearest]) / two_h_sq)
        total = alpha.sum()
        x_tilde = alpha @ Xc / total
        y_tilde = alpha @ Yc / total
        root = np.sqrt(alpha)[:, None]
        A = (Xc - x_tilde) * root
        B = (Yc - y_tilde) * root
        U, _, Vt = np.linalg.svd(A.T @ B, full_matrices=False)
        M = U @ Vt
        Y[i] = (X[i] - x_tilde) @ M + y_tilde

    params = ProjectionParams(control_fraction=float(control_fraction))
    return Projection(
        id=projection_id(dataset.id, "lamp", params, seed),
        dataset_id=dataset.id,
        technique="lamp",
        params=params,
        coords=Y,
        seed=seed,
    )
