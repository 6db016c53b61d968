"""Time meshes: ordered segment partitions of a horizon.

A mesh over [t0, tf] is a strictly increasing point list
t0 = tau_0 < ... < tau_K = tf. Segment k (0-based) is the open interval
(tau_k, tau_{k+1}); the K "mesh points" are the left endpoints
{tau_0, ..., tau_{K-1}}. Resolution ``h`` is the largest segment length and
the quasi-uniformity ratio ``sigma`` is min length / max length.

Meshes are immutable; refinement returns new meshes so that error
certificates can keep a reference to the mesh they were computed on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

# Points closer than this are considered duplicates when inserting.
POINT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Mesh:
    points: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a mesh needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("mesh points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("mesh points must be strictly increasing")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def t0(self) -> float:
        return float(self.points[0])

    @property
    def tf(self) -> float:
        return float(self.points[-1])

    @property
    def n_segments(self) -> int:
        return self.points.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def h(self) -> float:
        return float(self.lengths.max())

    @property
    def sigma(self) -> float:
        lengths = self.lengths
        return float(lengths.min() / lengths.max())

    @property
    def mesh_points(self) -> np.ndarray:
        """Left endpoints of the segments (excludes tf)."""
        return self.points[:-1]

    def segment(self, k: int) -> tuple[float, float]:
        if not 0 <= k < self.n_segments:
            raise ValueError(f"segment index {k} out of range [0, {self.n_segments})")
        return float(self.points[k]), float(self.points[k + 1])

    def segment_of(self, t: float) -> int:
        """Index of the segment containing t; interior points map to the right segment."""
        if t < self.t0 - POINT_TOLERANCE or t > self.tf + POINT_TOLERANCE:
            raise ValueError(f"time {t} outside mesh horizon [{self.t0}, {self.tf}]")
        k = int(np.searchsorted(self.points, t, side="right")) - 1
        return min(max(k, 0), self.n_segments - 1)


def uniform_mesh(t0: float, tf: float, n_segments: int) -> Mesh:
    """Mesh with ``n_segments`` equal segments over [t0, tf]."""
    if n_segments < 1:
        raise ValueError("segment count must be at least 1")
    if not tf > t0:
        raise ValueError(f"need tf > t0, got [{t0}, {tf}]")
    return Mesh(np.linspace(t0, tf, n_segments + 1))


def mesh_parameters(mesh: Mesh) -> tuple[float, float, int]:
    """(h, sigma, K): resolution, quasi-uniformity ratio and segment count."""
    return mesh.h, mesh.sigma, mesh.n_segments


def subdivide(mesh: Mesh, plan: Mapping[int, int]) -> Mesh:
    """Split segment k into (plan[k] + 1) equal subsegments for each plan entry.

    All existing points are preserved; an empty plan returns an identical mesh.
    """
    pts = [mesh.points]
    for k, count in plan.items():
        if not 0 <= k < mesh.n_segments:
            raise ValueError(f"subdivision plan references invalid segment {k}")
        if count < 1:
            raise ValueError(f"added-point count for segment {k} must be >= 1")
        a, b = mesh.segment(k)
        pts.append(np.linspace(a, b, count + 2)[1:-1])
    merged = np.sort(np.concatenate(pts))
    # Drop near-duplicates from floating-point insertion.
    keep = np.concatenate([[True], np.diff(merged) > POINT_TOLERANCE])
    return Mesh(merged[keep])


def covering_prefix(mesh: Mesh, t: float) -> np.ndarray:
    """Indices of segments T with T intersecting closure((t0, t)).

    This is the segment set over which the triggering bounds accumulate
    per-segment quadratures. ``t = t0`` maps to the first segment by
    convention; a ``t`` at an interior mesh point covers only the segments
    to its left.
    """
    if t < mesh.t0 - POINT_TOLERANCE or t > mesh.tf + POINT_TOLERANCE:
        raise ValueError(f"time {t} outside mesh horizon [{mesh.t0}, {mesh.tf}]")
    if t <= mesh.t0 + POINT_TOLERANCE:
        return np.array([0], dtype=int)
    # Segment k = (tau_k, tau_{k+1}) intersects [t0, t] iff tau_k < t.
    last = int(np.searchsorted(mesh.points[:-1], t - POINT_TOLERANCE, side="left")) - 1
    return np.arange(0, max(last, 0) + 1, dtype=int)
