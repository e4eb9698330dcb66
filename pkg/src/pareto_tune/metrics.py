"""Generational distance, inverted generational distance and averaged Hausdorff distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoFeasibleFrontError, UndefinedMetricError

DEFAULT_P = 1.0


@dataclass(frozen=True)
class FrontSample:
    points: np.ndarray
    feasible_only: bool = False

    @classmethod
    def from_archive(cls, archive) -> FrontSample:
        """Feasible objective vectors of an archive; raises when none remain."""
        entries = archive.feasible_entries()
        if not entries:
            raise NoFeasibleFrontError("no feasible front: every archive point violates a constraint")
        return cls(np.array([e.eval.objectives for e in entries], dtype=float), True)


def _as_points(s) -> np.ndarray:
    pts = s.points if isinstance(s, FrontSample) else s
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.size == 0 or len(pts) == 0:
        raise UndefinedMetricError("metric needs nonempty point sets")
    return pts


def nearest_distances(A, B) -> np.ndarray:
    """Euclidean distance from every point of A to its nearest point in B."""
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("point sets differ in dimension")
    d, _ = cKDTree(B).query(A, k=1)
    return np.asarray(d, dtype=float)


def _power_mean(d: np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return float(np.mean(d))
    return float(np.mean(d**p) ** (1.0 / p))


def gd(A, B, p: float = DEFAULT_P) -> float:
    """Power mean over A of the distance to the nearest point of B."""
    return _power_mean(nearest_distances(A, B), p)


def igd(A, B, p: float = DEFAULT_P) -> float:
    return gd(B, A, p)


def averaged_hausdorff(A, B, p: float = DEFAULT_P, feasible=None) -> float:
    """``max(gd, igd)``; rows of A flagged infeasible are dropped first."""
    A = _as_points(A)
    if feasible is not None:
        A = A[np.asarray(feasible, dtype=bool)]
        if len(A) == 0:
            raise NoFeasibleFrontError("no feasible front: every approximation point is infeasible")
    return max(gd(A, B, p), igd(A, B, p))


def all_metrics(A, B, p: float = DEFAULT_P) -> dict:
    g, i = gd(A, B, p), igd(A, B, p)
    return {"gd": g, "igd": i, "avg_hausdorff": max(g, i), "p": p}
