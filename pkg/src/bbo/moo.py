"""Multi-objective mathematics: dominance, sorting, crowding, hypervolume.

Minimization convention throughout. Hypervolume is exact: a sweep for two
objectives and dimension-recursive slicing for three or more.
"""

from __future__ import annotations

import warnings

import numpy as np


def dominates(a, b) -> bool:
    """True iff a <= b componentwise and a < b in at least one component."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"objective vectors differ in length: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_sort(points) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts as lists of point indices.

    Front 0 is the non-dominated set; front k is non-dominated once fronts
    < k are removed. Uses the O(m n^2) domination-count bookkeeping.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, m) array")
    n = pts.shape[0]

    # pairwise dominance matrix: dom[i, j] = i dominates j
    less_eq = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    less = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = less_eq & less

    n_dominators = dom.sum(axis=0)
    dominated_by = [np.flatnonzero(dom[i]) for i in range(n)]

    fronts: list[list[int]] = []
    current = [i for i in range(n) if n_dominators[i] == 0]
    counts = n_dominators.copy()
    while current:
        fronts.append(sorted(current))
        nxt = []
        for p in current:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(int(q))
        current = nxt
    return fronts


def crowding_distance(front_points) -> np.ndarray:
    """NSGA-II crowding distance for one front.

    Boundary points per objective get +inf; interior points accumulate the
    normalized neighbor gap. Objectives with zero range contribute 0.
    """
    pts = np.asarray(front_points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("front must be a non-empty (n, m) array")
    n, m = pts.shape
    dist = np.zeros(n)
    for j in range(m):
        order = np.argsort(pts[:, j], kind="stable")
        col = pts[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0 and n > 2:
            gaps = (col[2:] - col[:-2]) / span
            dist[order[1:-1]] += gaps
    return dist


def _pareto_filter(pts: np.ndarray) -> np.ndarray:
    """Drop dominated and duplicate rows (keeps the measure unchanged)."""
    n = pts.shape[0]
    if n <= 1:
        return pts
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)  # le[j, i]: p_j <= p_i
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = le & lt
    dominated = dom.any(axis=0)
    eq = le & le.T
    earlier_dup = np.triu(eq, k=1).any(axis=0)
    return pts[~(dominated | earlier_dup)]


def _hv_sweep_2d(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.argsort(pts[:, 0], kind="stable")
    total = 0.0
    cur = ref[1]
    for a, b in pts[order]:
        if b < cur:
            total += (ref[0] - a) * (cur - b)
            cur = b
    return float(total)


def _hv_recursive(pts: np.ndarray, ref: np.ndarray) -> float:
    """Exact hypervolume by slicing on the last objective."""
    m = ref.shape[0]
    if pts.shape[0] == 0:
        return 0.0
    if m == 1:
        return float(ref[0] - pts[:, 0].min())
    order = np.argsort(pts[:, -1], kind="stable")
    pts = pts[order]
    total = 0.0
    n = pts.shape[0]
    for i in range(n):
        upper = pts[i + 1, -1] if i + 1 < n else ref[-1]
        height = upper - pts[i, -1]
        if height <= 0:
            continue
        slab = _pareto_filter(pts[: i + 1, :-1])
        total += height * _hv_recursive(slab, ref[:-1])
    return float(total)


def hypervolume(points, ref_point, force_recursive: bool = False) -> float:
    """Lebesgue measure of the union of boxes [p_i, ref_point].

    Points with any component beyond the reference point are filtered out
    first. ``force_recursive`` routes m=2 input through the recursive path
    (consistency checks only).
    """
    ref = np.asarray(ref_point, dtype=float)
    if ref.ndim != 1 or ref.shape[0] < 2:
        raise ValueError("ref_point must be a vector of length >= 2")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0.0
    pts = pts.reshape(-1, ref.shape[0])
    pts = pts[np.all(pts <= ref, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    pts = _pareto_filter(pts)
    if ref.shape[0] == 2 and not force_recursive:
        return _hv_sweep_2d(pts, ref)
    return _hv_recursive(pts, ref)


def hypervolume_difference(points, ref_point, optimal_hv: float) -> float:
    """optimal_hv minus the achieved hypervolume (the regret-style metric).

    Negative values mean optimal_hv underestimates the true optimum; they are
    returned as-is with a warning.
    """
    if optimal_hv < 0:
        raise ValueError("optimal_hv must be >= 0")
    diff = float(optimal_hv) - hypervolume(points, ref_point)
    if diff < 0:
        warnings.warn(
            f"achieved hypervolume exceeds optimal_hv by {-diff:.3g}; "
            "the supplied optimum appears to be an underestimate",
            stacklevel=2,
        )
    return diff
