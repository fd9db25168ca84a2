import numpy as np
import pytest

from conftest import make_blobs
from projwb.datasets import DistanceMatrix, pairwise_distances
from projwb.metrics import WeightVector, evaluate_projection, stress
from projwb.projections import Projection, ProjectionParams
from projwb.scaleopt import (
    ScaleSearch,
    closed_form_stress_scale,
    optimal_scale,
    search_scale,
)


def random_instance(seed, n=8):
    rng = np.random.default_rng(seed)
    d_high = pairwise_distances(rng.normal(size=(n, 4)))
    d_low = pairwise_distances(rng.normal(size=(n, 2)))
    return d_high, d_low


def scaled(d_low, s):
    return DistanceMatrix(d_low.values * s)


def test_closed_form_identity():
    d_high, _ = random_instance(0)
    assert abs(closed_form_stress_scale(d_high, d_high) - 1.0) < 1e-12


def test_closed_form_single_pair():
    d_high = pairwise_distances(np.array([[0.0], [2.0]]))
    d_low = pairwise_distances(np.array([[0.0], [1.0]]))
    s_star = closed_form_stress_scale(d_high, d_low)
    assert abs(s_star - 2.0) < 1e-12
    assert stress(d_high, scaled(d_low, s_star)) < 1e-15


def test_closed_form_inverse_of_uniform_scale():
    d_high, _ = random_instance(1)
    for c in (0.25, 3.0, 10.0):
        assert abs(closed_form_stress_scale(d_high, scaled(d_high, c)) - 1.0 / c) < 1e-10


def test_closed_form_rejects_all_zero_low():
    d_high, _ = random_instance(2)
    zeros = DistanceMatrix(np.zeros_like(d_high.values))
    with pytest.raises(ValueError):
        closed_form_stress_scale(d_high, zeros)


def test_closed_form_minimizes_stress():
    d_high, d_low = random_instance(3)
    s_star = closed_form_stress_scale(d_high, d_low)
    best = stress(d_high, scaled(d_low, s_star))
    for s in np.linspace(0.2 * s_star, 5.0 * s_star, 41):
        assert stress(d_high, scaled(d_low, float(s))) >= best - 1e-12


def test_negative_stress_weight_matches_closed_form():
    # Q = base + w3*stress(s) with w3 < 0 is maximized at the stress minimum
    worst = 0.0
    for seed in range(50):
        d_high, d_low = random_instance(seed)
        s_star = closed_form_stress_scale(d_high, d_low)
        w = WeightVector(2.0, 1.0, -0.5, 0.3)
        result = search_scale(d_high, d_low, w)
        rel = abs(result.result_s - s_star) / s_star
        worst = max(worst, rel)
        assert rel < 1e-4
    assert worst < 1e-4


def test_zero_stress_weight_returns_unit_scale():
    d_high, d_low = random_instance(60)
    result = search_scale(d_high, d_low, WeightVector(1.0, 2.0, 0.0, 1.0))
    assert result.result_s == 1.0
    assert not result.at_boundary


def test_positive_stress_weight_hits_upper_bound():
    for seed in range(10):
        d_high, d_low = random_instance(seed + 100)
        w = WeightVector(1.0, 0.5, 0.7, 0.2)
        result = search_scale(d_high, d_low, w)
        assert result.at_boundary
        assert abs(result.result_s - result.s_max) <= 2 * result.tolerance
        # grid check: the s-dependent part of Q grows toward the boundary
        def q_part(s):
            return w.w3 * stress(d_high, scaled(d_low, s))

        s_star = closed_form_stress_scale(d_high, d_low)
        grid = np.linspace(s_star, result.s_max, 20)
        values = [q_part(float(s)) for s in grid]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert q_part(result.s_max) >= q_part(1.0) - 1e-12


def test_search_scale_respects_custom_bounds():
    d_high, d_low = random_instance(7)
    bounds = ScaleSearch(s_min=0.5, s_max=2.0, tolerance=1e-8)
    result = search_scale(d_high, d_low, WeightVector(0.0, 0.0, -1.0, 0.0), bounds)
    assert 0.5 <= result.result_s <= 2.0


def test_scale_search_validation():
    with pytest.raises(ValueError):
        ScaleSearch(s_min=2.0, s_max=1.0)
    with pytest.raises(ValueError):
        ScaleSearch(s_min=0.0, s_max=1.0)
    with pytest.raises(ValueError):
        ScaleSearch(s_min=0.5, s_max=2.0, tolerance=0.0)


def test_scale_invariant_metrics_unchanged():
    ds = make_blobs(8, [(0.0, 0.0, 0.0), (3.0, 3.0, 3.0)], 0.6, seed=21)
    rng = np.random.default_rng(22)
    coords = rng.normal(size=(ds.n, 2))
    d_high = pairwise_distances(ds.features)
    base = evaluate_projection(d_high, coords, ds.labels, 5)
    for s in (0.1, 0.5, 7.3):
        view = evaluate_projection(d_high, coords * s, ds.labels, 5)
        assert abs(view.sc - base.sc) < 1e-12
        assert abs(view.np - base.np) < 1e-12


def test_optimal_scale_rescales_projection():
    ds = make_blobs(8, [(0.0, 0.0, 0.0), (3.0, 3.0, 3.0)], 0.6, seed=31)
    rng = np.random.default_rng(32)
    coords = rng.normal(size=(ds.n, 2))
    proj = Projection(
        id="p" + "0" * 12,
        dataset_id=ds.id,
        technique="imported",
        params=ProjectionParams(),
        coords=coords,
        seed=0,
    )
    d_high = pairwise_distances(ds.features)
    w = WeightVector(2.0, 1.0, -0.5, 0.3)
    out = optimal_scale(d_high, proj, w)
    s_star = closed_form_stress_scale(d_high, pairwise_distances(coords))
    assert abs(out.scale - s_star) / s_star < 1e-4
    assert np.allclose(out.coords, coords * out.scale)
    # unit-scale result returns the projection unchanged
    unchanged = optimal_scale(d_high, proj, WeightVector(1.0, 1.0, 0.0, 1.0))
    assert unchanged is proj
