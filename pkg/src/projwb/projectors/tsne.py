"""Exact t-SNE with all-pairs affinities, no tree approximations.

Per-point bandwidths come from a bracketed binary search matching the
conditional distribution's perplexity to the target. The layout is
optimized by gradient descent with momentum, adaptive per-coordinate
gains, and early exaggeration, tracking the KL divergence at every
iteration. O(n^2) memory and time per iteration, which is fine at desk
scale and keeps the result an exact function of (data, perplexity, seed).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..datasets import Dataset, pairwise_distances
from ..projections import Projection, ProjectionParams, projection_id

DEFAULT_ITERATIONS = 1000
DEFAULT_LEARNING_RATE = 200.0
EARLY_EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
INITIAL_MOMENTUM = 0.5
FINAL_MOMENTUM = 0.8
MIN_GAIN = 0.01
PERPLEXITY_TOL = 1e-5
SIGMA_SEARCH_ITERS = 50


@njit(cache=True, nogil=True)  # no fastmath: the bracket search relies on inf sentinels
def _conditional_probs(sq_dists, perplexity):
    """Row-stochastic conditional affinities with per-point bandwidth search.

    Searches beta = 1/(2 sigma^2) per row until exp(entropy) matches the
    target perplexity within PERPLEXITY_TOL or the iteration cap is hit.
    Distances are shifted by the row minimum before exponentiation so the
    search stays finite for any beta.
    """
    n = sq_dists.shape[0]
    P = np.zeros((n, n))
    probs = np.empty(n)
    for i in range(n):
        # smallest off-diagonal squared distance, for the stability shift
        shift = np.inf
        for j in range(n):
            if j != i and sq_dists[i, j] < shift:
                shift = sq_dists[i, j]

        beta = 1.0
        beta_min = 0.0
        beta_max = np.inf
        for _ in range(SIGMA_SEARCH_ITERS):
            total = 0.0
            weighted = 0.0
            for j in range(n):
                if j == i:
                    probs[j] = 0.0
                    continue
                d = sq_dists[i, j] - shift
                p = np.exp(-beta * d)
                probs[j] = p
                total += p
                weighted += d * p
            entropy = np.log(total) + beta * weighted / total
            achieved = np.exp(entropy)
            if abs(achieved - perplexity) <= PERPLEXITY_TOL:
                break
            if achieved > perplexity:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
        for j in range(n):
            P[i, j] = probs[j] / total
    return P


@njit(cache=True, fastmath=True, nogil=True)
def _gradient_step(P, Y, num, grad):
    """Fill `grad` with the KL gradient at layout Y; return the KL value."""
    n = Y.shape[0]
    z = 0.0
    for i in range(n):
        num[i, i] = 0.0
        for j in range(i + 1, n):
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            q = 1.0 / (1.0 + dx * dx + dy * dy)
            num[i, j] = q
            num[j, i] = q
            z += 2.0 * q
    kl = 0.0
    for i in range(n):
        gx = 0.0
        gy = 0.0
        for j in range(n):
            if j == i:
                continue
            q = num[i, j]
            mult = (P[i, j] - q / z) * q
            gx += mult * (Y[i, 0] - Y[j, 0])
            gy += mult * (Y[i, 1] - Y[j, 1])
            if P[i, j] > 0.0:
                qij = q / z
                if qij < 1e-12:
                    qij = 1e-12
                kl += P[i, j] * np.log(P[i, j] / qij)
        grad[i, 0] = 4.0 * gx
        grad[i, 1] = 4.0 * gy
    return kl


def achieved_perplexities(P_conditional: np.ndarray) -> np.ndarray:
    """exp(entropy) of each conditional row, for checking the sigma search."""
    n = P_conditional.shape[0]
    out = np.empty(n)
    for i in range(n):
        row = P_conditional[i]
        nz = row[row > 0]
        out[i] = np.exp(-(nz * np.log(nz)).sum())
    return out


def joint_probabilities(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized joint affinities, floored at 1e-12 like the reference."""
    P = _conditional_probs(sq_dists, perplexity)
    P = (P + P.T) / (2.0 * P.shape[0])
    return np.maximum(P, 1e-12)


def _embed(
    sq_dists: np.ndarray,
    perplexity: float,
    seed: int,
    iterations: int,
    learning_rate: float,
) -> tuple[np.ndarray, list[float]]:
    n = sq_dists.shape[0]
    P = joint_probabilities(sq_dists, perplexity)

    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros((n, 2))
    gains = np.ones((n, 2))
    grad = np.empty((n, 2))
    num = np.empty((n, n))

    exaggerated = P * EARLY_EXAGGERATION
    history: list[float] = []
    for it in range(iterations):
        active = exaggerated if it < EXAGGERATION_ITERS else P
        kl = _gradient_step(active, Y, num, grad)
        history.append(float(kl))

        momentum = INITIAL_MOMENTUM if it < EXAGGERATION_ITERS else FINAL_MOMENTUM
        flip = (grad > 0.0) != (velocity > 0.0)
        gains[flip] += 0.2
        gains[~flip] *= 0.8
        np.maximum(gains, MIN_GAIN, out=gains)
        velocity = momentum * velocity - learning_rate * gains * grad
        Y += velocity
        Y -= Y.mean(axis=0)
    return Y, history


def tsne(
    dataset: Dataset,
    perplexity: float,
    seed: int,
    iterations: int = DEFAULT_ITERATIONS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> Projection:
    n = dataset.n
    limit = (n - 1) / 3.0
    if not 1.0 <= perplexity <= limit:
        raise ValueError(
            f"perplexity must be in [1, {limit:.6g}] for n={n}, got {perplexity}"
        )
    d = pairwise_distances(dataset.features).values
    sq_dists = d * d
    coords, _ = _embed(sq_dists, float(perplexity), seed, iterations, learning_rate)
    params = ProjectionParams(
        perplexity=float(perplexity),
        iterations=iterations,
        learning_rate=learning_rate,
    )
    return Projection(
        id=projection_id(dataset.id, "tsne", params, seed),
        dataset_id=dataset.id,
        technique="tsne",
        params=params,
        coords=coords,
        seed=seed,
    )
