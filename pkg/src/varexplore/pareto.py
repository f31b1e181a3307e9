"""Dominance ranking on objective vectors.

Directions are the strings ``"minimize"`` / ``"maximize"``; everything is
converted to minimisation internally.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionMismatch

MINIMIZE = "minimize"
MAXIMIZE = "maximize"


def _as_minimization(points, directions) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if len(directions) == 1 else pts.reshape(1, -1)
    if pts.size == 0:
        return pts.reshape(0, len(directions))
    if pts.shape[1] != len(directions):
        raise DimensionMismatch(f"objective vectors have {pts.shape[1]} entries, directions has {len(directions)}")
    signs = np.array([1.0 if d == MINIMIZE else -1.0 for d in directions])
    for d in directions:
        if d not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"unknown direction {d!r}")
    return pts * signs


def dominates(a, b, directions) -> bool:
    """True if ``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    pa, pb = _as_minimization([a, b], directions)
    return bool(np.all(pa <= pb) and np.any(pa < pb))


def nondominated_sort(points: Sequence[Sequence[float]], directions: Sequence[str]) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts as ascending index lists."""
    pts = _as_minimization(points, directions)
    n = len(pts)
    if n == 0:
        return []
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append(current.tolist())
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def crowding_distance(points: Sequence[Sequence[float]]) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n, m = pts.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(pts[:, k], kind="stable")
        col = pts[order, k]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span <= 0:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def pareto_front(points, directions) -> list[int]:
    fronts = nondominated_sort(points, directions)
    return fronts[0] if fronts else []
