"""Pick the uniform layout scale that maximizes the composite score.

Silhouette and neighborhood preservation are invariant to uniform scaling,
so the composite varies with scale only through the stress term:

    stress(s)^2 = (A - 2sB + s^2 C) / A

with A = sum d^2, B = sum d*d', C = sum d'^2 over unordered pairs. The
unique stress minimizer is s* = B / C, which is both a fast oracle and the
anchor for the search interval. The search itself is golden-section over Q
so it stays correct for any sign of the stress weight; when raising stress
raises Q the optimum sits on the interval boundary and is flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .datasets import DistanceMatrix, pairwise_distances
from .metrics import WeightVector
from .projections import Projection

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1 / phi
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1 / phi^2

DEFAULT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ScaleSearch:
    """Bounds and tolerance of one scale search, plus its outcome.

    Construct with bounds only; ``result_s``/``result_q`` are filled by
    ``search_scale``. ``at_boundary`` marks an optimum pinned to s_min or
    s_max, which happens when the objective rewards unbounded stress.
    """

    s_min: float
    s_max: float
    tolerance: float = DEFAULT_TOLERANCE
    result_s: float = math.nan
    result_q: float = math.nan
    at_boundary: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.s_min < self.s_max):
            raise ValueError(f"need 0 < s_min < s_max, got [{self.s_min}, {self.s_max}]")
        if not self.tolerance > 0.0:
            raise ValueError(f"tolerance must be positive: {self.tolerance}")
        if not math.isnan(self.result_s) and not self.s_min <= self.result_s <= self.s_max:
            raise ValueError(f"result_s {self.result_s} outside [{self.s_min}, {self.s_max}]")


def closed_form_stress_scale(d_high: DistanceMatrix, d_low: DistanceMatrix) -> float:
    """s* = sum(d * d') / sum(d'^2), the unique minimizer of stress(s * layout)."""
    if d_high.n != d_low.n:
        raise ValueError(f"size mismatch: {d_high.n} vs {d_low.n}")
    dh = d_high.upper_pairs()
    dl = d_low.upper_pairs()
    denom = float(dl @ dl)
    if denom == 0.0:
        raise ValueError("scale undefined: all layout distances are zero")
    return float(dh @ dl) / denom


def _golden_max(f, lo: float, hi: float, tolerance: float) -> float:
    """Golden-section maximizer; returns the midpoint of the final bracket."""
    a, b = lo, hi
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tolerance:
        if fc > fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
    return (a + b) / 2.0


def search_scale(
    d_high: DistanceMatrix,
    d_low: DistanceMatrix,
    w: WeightVector,
    search: ScaleSearch | None = None,
) -> ScaleSearch:
    """Find the scale in [s_min, s_max] maximizing the composite.

    Only the stress term moves, so the search maximizes
    base + w3 * stress(s) with the other terms folded into a constant the
    caller applies. Here ``result_q`` holds just the s-dependent part,
    w3 * stress(s); callers add their own base. The identity scale s = 1 is
    always a candidate, so the result never scores below the unscaled
    layout.
    """
    if d_high.n != d_low.n:
        raise ValueError(f"size mismatch: {d_high.n} vs {d_low.n}")
    dh = d_high.upper_pairs()
    dl = d_low.upper_pairs()
    a_term = float(dh @ dh)
    if a_term == 0.0:
        raise ValueError("stress undefined: all original distances are zero")
    b_term = float(dh @ dl)
    c_term = float(dl @ dl)

    def stress_at(s: float) -> float:
        value = (a_term - 2.0 * s * b_term + s * s * c_term) / a_term
        return math.sqrt(max(value, 0.0))

    def q_part(s: float) -> float:
        return w.w3 * stress_at(s)

    if search is None:
        if c_term == 0.0:
            # degenerate all-zero layout: stress is constant in s
            done = ScaleSearch(s_min=0.5, s_max=2.0)
            return replace(done, result_s=1.0, result_q=q_part(1.0), at_boundary=False)
        s_star = b_term / c_term
        if s_star <= 0.0:
            s_star = 1.0
        # widen just enough that the identity scale is always reachable
        search = ScaleSearch(s_min=min(0.1 * s_star, 1.0), s_max=max(10.0 * s_star, 1.0))

    if w.w3 == 0.0:
        # objective constant in s; keep the layout as-is
        result_s = min(max(1.0, search.s_min), search.s_max)
        return replace(search, result_s=result_s, result_q=q_part(result_s), at_boundary=False)

    tol = search.tolerance
    best = _golden_max(q_part, search.s_min, search.s_max, tol)
    # snap near-boundary results and always consider the endpoints and s=1,
    # because golden section assumes unimodality and a positive stress
    # weight makes the maximum sit on an endpoint
    candidates = [best, search.s_min, search.s_max]
    if search.s_min <= 1.0 <= search.s_max:
        candidates.append(1.0)
    scored = [(q_part(s), -s, s) for s in candidates]
    _, _, result_s = max(scored)
    if abs(result_s - search.s_min) <= 2.0 * tol:
        result_s = search.s_min
    elif abs(result_s - search.s_max) <= 2.0 * tol:
        result_s = search.s_max
    at_boundary = result_s in (search.s_min, search.s_max)
    return replace(search, result_s=result_s, result_q=q_part(result_s), at_boundary=at_boundary)


def optimal_scale(
    d_high: DistanceMatrix,
    projection: Projection,
    w: WeightVector,
    search: ScaleSearch | None = None,
) -> Projection:
    """The projection rescaled to the composite-maximizing s."""
    done = search_scale(d_high, pairwise_distances(projection.coords), w, search)
    if done.result_s == 1.0:
        return projection
    return projection.rescaled(done.result_s)
