"""Collision cost of polylines: inside length plus surface wrap-around."""

from __future__ import annotations

import numpy as np

from ..geometry import _kernels as K
from ..geometry.geodesic import GeodesicTable
from ..geometry.mesh import TriMesh


def pack_polylines(polylines) -> tuple:
    """CSR packing: (points (P, 3), offsets (L + 1,))."""
    lens = [len(p) for p in polylines]
    offsets = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=offsets[1:])
    pts = np.concatenate([np.asarray(p, dtype=float).reshape(-1, 3) for p in polylines]) \
        if polylines else np.zeros((0, 3))
    return np.ascontiguousarray(pts), offsets


class PathCoster:
    """Evaluates inside / wrap-around distances against one object."""

    def __init__(self, mesh: TriMesh, geodesics: GeodesicTable | None = None):
        self.mesh = mesh
        self.geodesics = geodesics

    @classmethod
    def for_object(cls, mesh: TriMesh, edge_fraction: float = 0.02) -> "PathCoster":
        return cls(mesh, GeodesicTable.from_object(mesh, edge_fraction))

    def evaluate_packed(self, points, offsets, wraparound: bool = True):
        """Per-polyline (inside, wrap) arrays for CSR-packed polylines."""
        L = len(offsets) - 1
        if L == 0:
            return np.zeros(0), np.zeros(0)
        inside, npair, pairs = K.batch_polyline_eval(points, offsets, self.mesh.kernel_data)
        wrap = np.zeros(L)
        if wraparound and npair.any():
            if self.geodesics is None:
                raise ValueError("wrap-around distance needs a geodesic table")
            rows = np.flatnonzero(npair)
            cnt = np.minimum(npair[rows], K.PAIR_CAP)
            sel_r = np.repeat(rows, cnt)
            sel_k = np.concatenate([np.arange(c) for c in cnt])
            a = pairs[sel_r, sel_k, 0]
            b = pairs[sel_r, sel_k, 1]
            np.add.at(wrap, sel_r, self.geodesics.distances(a, b))
        return inside, wrap

    def evaluate(self, polylines, wraparound: bool = True):
        pts, off = pack_polylines(polylines)
        return self.evaluate_packed(pts, off, wraparound)

    def path_cost(self, path) -> float:
        i, w = self.evaluate([path])
        return float(i[0] + w[0])


def inside_distance(path, mesh: TriMesh) -> float:
    return float(PathCoster(mesh).evaluate([path], wraparound=False)[0][0])


def wraparound_distance(path, mesh: TriMesh, geodesics: GeodesicTable) -> float:
    return float(PathCoster(mesh, geodesics).evaluate([path])[1][0])


def path_cost(path, mesh: TriMesh, geodesics: GeodesicTable) -> float:
    return PathCoster(mesh, geodesics).path_cost(path)
