"""Reduced UMAP: exact k-NN graph, fixed curve constants, PCA init.

The fuzzy graph construction follows the standard recipe (per-point
bandwidth matching log2(k), probabilistic union), but the embedding skips
the usual frills: the low-dimensional curve constants are fixed at the
values for min_dist 0.1 instead of being refit, and the layout starts from
the top two principal directions instead of a spectral embedding. The
stochastic optimizer draws all randomness from one xorshift state seeded
per run, so results are reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..datasets import Dataset, pairwise_distances
from ..projections import Projection, ProjectionParams, projection_id

DEFAULT_ITERATIONS = 500
DEFAULT_LEARNING_RATE = 1.0
CURVE_A = 1.577
CURVE_B = 0.8951
NEGATIVE_SAMPLE_RATE = 5
REPULSION_STRENGTH = 1.0
SMOOTH_K_TOL = 1e-5
SMOOTH_K_ITERS = 64


@njit(cache=True, nogil=True)  # no fastmath: the bracket search relies on an inf sentinel
def _smooth_knn(knn_dists):
    """Per-point bandwidths: sum_j exp(-max(0, d_ij - rho_i)/sigma_i) = log2(k).

    rho_i is the nearest-neighbor distance. Binary search with an expanding
    upper bracket, 64 iterations.
    """
    n, k = knn_dists.shape
    target = np.log2(k)
    sigmas = np.empty(n)
    rhos = np.empty(n)
    for i in range(n):
        rho = knn_dists[i, 0]
        rhos[i] = rho
        lo = 0.0
        hi = np.inf
        mid = 1.0
        for _ in range(SMOOTH_K_ITERS):
            psum = 0.0
            for j in range(k):
                d = knn_dists[i, j] - rho
                if d > 0.0:
                    psum += np.exp(-d / mid)
                else:
                    psum += 1.0
            if abs(psum - target) < SMOOTH_K_TOL:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigmas[i] = max(mid, 1e-12)
    return sigmas, rhos


@njit(cache=True, fastmath=True, nogil=True, inline="always")
def _clip(value):
    if value > 4.0:
        return 4.0
    if value < -4.0:
        return -4.0
    return value


@njit(cache=True, fastmath=True, nogil=True, inline="always")
def _rand_int(state):
    # three-component tausworthe generator; state entries stay in 32 bits
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
    )
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
    )
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
    )
    return state[0] ^ state[1] ^ state[2]


@njit(cache=True, fastmath=True, nogil=True)
def _optimize_layout(
    Y,
    head,
    tail,
    epochs_per_sample,
    n_epochs,
    initial_alpha,
    rng_state,
):
    n_vertices = Y.shape[0]
    n_edges = head.shape[0]
    epochs_per_negative = epochs_per_sample / NEGATIVE_SAMPLE_RATE
    next_sample = epochs_per_sample.copy()
    next_negative = epochs_per_negative.copy()
    a = CURVE_A
    b = CURVE_B
    for epoch in range(n_epochs):
        alpha = initial_alpha * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            dsq = dx * dx + dy * dy
            if dsq > 0.0:
                coeff = (-2.0 * a * b * dsq ** (b - 1.0)) / (a * dsq**b + 1.0)
                gx = _clip(coeff * dx)
                gy = _clip(coeff * dy)
                Y[i, 0] += gx * alpha
                Y[i, 1] += gy * alpha
                Y[j, 0] -= gx * alpha
                Y[j, 1] -= gy * alpha
            next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                t = _rand_int(rng_state) % n_vertices
                if t < 0:
                    t += n_vertices
                dx = Y[i, 0] - Y[t, 0]
                dy = Y[i, 1] - Y[t, 1]
                dsq = dx * dx + dy * dy
                if dsq > 0.0:
                    coeff = (2.0 * REPULSION_STRENGTH * b) / (
                        (0.001 + dsq) * (a * dsq**b + 1.0)
                    )
                    gx = _clip(coeff * dx)
                    gy = _clip(coeff * dy)
                elif i == t:
                    continue
                else:
                    # coincident but distinct vertices: push hard along both axes
                    gx = 4.0
                    gy = 4.0
                Y[i, 0] += gx * alpha
                Y[i, 1] += gy * alpha
            next_negative[e] += n_neg * epochs_per_negative[e]
    return Y


def knn_graph(dist: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(indices, distances) of each point's k nearest others, ties by index."""
    order = np.argsort(dist, axis=1, kind="stable")
    n = dist.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = order[i]
        idx[i] = row[row != i][:k]
    return idx, np.take_along_axis(dist, idx, axis=1)


def fuzzy_graph(dist: np.ndarray, k: int) -> np.ndarray:
    """Symmetric membership matrix: union w = a + b - ab over the k-NN graph."""
    idx, knn_dists = knn_graph(dist, k)
    sigmas, rhos = _smooth_knn(knn_dists)
    n = dist.shape[0]
    A = np.zeros((n, n))
    for i in range(n):
        d = knn_dists[i] - rhos[i]
        A[i, idx[i]] = np.exp(-np.maximum(d, 0.0) / sigmas[i])
    return A + A.T - A * A.T


def pca_init(features: np.ndarray) -> np.ndarray:
    """Top-2 principal directions, deterministic signs, unit column variance."""
    centered = features - features.mean(axis=0)
    cov = centered.T @ centered / centered.shape[0]
    _, vecs = np.linalg.eigh(cov)
    components = vecs[:, [-1, -2]]
    for col in range(2):
        v = components[:, col]
        if v[np.argmax(np.abs(v))] < 0:
            components[:, col] = -v
    Y = centered @ components
    std = Y.std(axis=0)
    std[std == 0.0] = 1.0
    return Y / std


def _make_edges(W: np.ndarray, n_epochs: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w_max = W.max()
    pruned = np.where(W >= w_max / n_epochs, W, 0.0)
    head, tail = np.nonzero(pruned)
    weights = pruned[head, tail]
    return head.astype(np.int64), tail.astype(np.int64), w_max / weights


def umap(
    dataset: Dataset,
    n_neighbors: int,
    seed: int,
    iterations: int = DEFAULT_ITERATIONS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    neighbor_fraction: float | None = None,
) -> Projection:
    n = dataset.n
    if not 2 <= n_neighbors <= n - 1:
        raise ValueError(f"n_neighbors must be in [2, {n - 1}] for n={n}, got {n_neighbors}")
    dist = pairwise_distances(dataset.features).values
    W = fuzzy_graph(dist, n_neighbors)
    head, tail, epochs_per_sample = _make_edges(W, iterations)

    Y = pca_init(dataset.features)
    rng_state = np.random.default_rng(seed).integers(1, 2**31 - 1, size=3).astype(np.int64)
    coords = _optimize_layout(
        Y, head, tail, epochs_per_sample, iterations, learning_rate, rng_state
    )

    params = ProjectionParams(
        n_neighbors=int(n_neighbors),
        neighbor_fraction=neighbor_fraction,
        iterations=iterations,
        learning_rate=learning_rate,
    )
    return Projection(
        id=projection_id(dataset.id, "umap", params, seed),
        dataset_id=dataset.id,
        technique="umap",
        params=params,
        coords=coords,
        seed=seed,
    )
