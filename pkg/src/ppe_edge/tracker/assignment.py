"""Minimum-cost rectangular assignment (Hungarian method, shortest augmenting paths)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np


class Infeasible(ValueError):
    """Every complete matching uses a forbidden (infinite-cost) pair."""


@dataclass(frozen=True)
class Assignment:
    matches: List[Tuple[int, int]]
    cost: float
    unassigned_rows: List[int]
    unassigned_cols: List[int]


def _solve_square_or_wide(cost: np.ndarray) -> np.ndarray:
    """Potentials-based O(n^2 m) solver for n <= m; returns the column of each row."""
    n, m = cost.shape
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j]: 1-based row matched to column j; column 0 is virtual
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], INF)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            used_idx = np.nonzero(used)[0]
            u[p[used_idx]] += delta
            v[used_idx] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.full(n, -1, dtype=int)
    for j in range(1, m + 1):
        if p[j]:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


def hungarian(cost) -> Assignment:
    """Match ``min(n, m)`` rows to columns at minimum total cost.

    ``inf`` entries mark forbidden pairs. Raises :class:`Infeasible` when no
    complete matching avoids them.
    """
    C = np.array(cost, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n, m = C.shape
    if n == 0 or m == 0:
        return Assignment([], 0.0, list(range(n)), list(range(m)))
    if np.isnan(C).any() or np.isneginf(C).any():
        raise ValueError("cost entries must be finite or +inf")
    transposed = n > m
    if transposed:
        C = C.T
    forbidden = np.isposinf(C)
    work = C.copy()
    if forbidden.any():
        finite = C[~forbidden]
        span = float(np.abs(finite).max()) if finite.size else 0.0
        # any matching avoiding forbidden pairs costs less than one forbidden pair
        big = (span + 1.0) * (min(C.shape) + 1) * 2
        work[forbidden] = big
    row_to_col = _solve_square_or_wide(work)
    pairs = [(i, int(j)) for i, j in enumerate(row_to_col)]
    if any(forbidden[i, j] for i, j in pairs):
        raise Infeasible("no complete matching avoids the forbidden pairs")
    if transposed:
        pairs = sorted((j, i) for i, j in pairs)
        C = C.T
    total = float(sum(C[i, j] for i, j in pairs))
    rows = {i for i, _ in pairs}
    cols = {j for _, j in pairs}
    return Assignment(
        pairs,
        total,
        [i for i in range(C.shape[0]) if i not in rows],
        [j for j in range(C.shape[1]) if j not in cols],
    )


def min_cost_matching(cost, threshold: float) -> Tuple[List[Tuple[int, int]], List[int], List[int]]:
    """Partial matching: solve with pairs above ``threshold`` forbidden, then drop them.

    Unlike :func:`hungarian` this never raises; rows or columns that can only
    be matched through a forbidden pair stay unmatched.
    """
    C = np.array(cost, dtype=float)
    n, m = C.shape if C.ndim == 2 else (0, 0)
    if n == 0 or m == 0:
        return [], list(range(n)), list(range(m))
    work = np.where(C > threshold, threshold + 1e-5, C)
    result = hungarian(work)
    matches = [(i, j) for i, j in result.matches if C[i, j] <= threshold]
    rows = {i for i, _ in matches}
    cols = {j for _, j in matches}
    return (
        matches,
        [i for i in range(n) if i not in rows],
        [j for j in range(m) if j not in cols],
    )
