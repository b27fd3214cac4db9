"""Ray/segment queries against a TriMesh (thin wrappers over the kernels)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .mesh import TriMesh

ENTERING = -1
EXITING = 1


@dataclass(frozen=True)
class Crossing:
    t: float
    entering: bool
    point: np.ndarray


def segment_mesh_intersections(mesh: TriMesh, p0, p1) -> list[Crossing]:
    """Ordered boundary crossings of the segment p0 -> p1.

    ``t`` is the segment parameter in [0, 1]. Tangential hits are dropped;
    coincident hits (within 1e-9 m) merge, and any ambiguity is settled by
    testing containment between crossings.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0.0 or mesh.is_empty:
        return []
    pts = np.ascontiguousarray(np.stack([p0, p1]))
    pos = np.empty(K.HIT_CAP + 1)
    sign = np.empty(K.HIT_CAP + 1, np.int64)
    n, _, _ = K.polyline_crossings(pts, mesh.kernel_data, pos, sign)
    out = []
    for s, sg in zip(pos[:n], sign[:n]):
        t = s / length
        out.append(Crossing(float(t), bool(sg == ENTERING), p0 + t * (p1 - p0)))
    return out


def point_inside(mesh: TriMesh, p) -> bool:
    return bool(K.point_inside_one(np.asarray(p, dtype=float), mesh.kernel_data))


def points_inside(mesh: TriMesh, points) -> np.ndarray:
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
    if len(pts) == 0 or mesh.is_empty:
        return np.zeros(len(pts), dtype=bool)
    return K.points_inside(pts, mesh.kernel_data)


def closest_points(mesh: TriMesh, points):
    """Nearest surface points; returns (points, distances, face ids)."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
    return K.closest_points(pts, mesh.kernel_data)


def winding_numbers(mesh: TriMesh, points) -> np.ndarray:
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
    return K.winding_numbers(pts, np.ascontiguousarray(mesh.triangles))


def segments_clear(mesh: TriMesh, p0, p1) -> np.ndarray:
    """True where the segment p0[i] -> p1[i] touches no triangle."""
    a = np.ascontiguousarray(np.broadcast_to(np.asarray(p0, dtype=float), np.shape(p1)).reshape(-1, 3))
    b = np.ascontiguousarray(np.asarray(p1, dtype=float).reshape(-1, 3))
    if len(b) == 0 or mesh.is_empty:
        return np.ones(len(b), dtype=bool)
    return K.segments_hit_count(a, b, mesh.kernel_data) == 0
