"""Shortest collision-free paths from the FFO through a voxelized free space.

The object (plus the floor half-space) is voxelized, dilated by a clearance,
and a 26-connected Dijkstra runs from the FFO cell. Paths are then shortened
by line-of-sight string pulling on the same free mask, so lengths approach
the true shortest path instead of the grid metric. The last leg from a free
cell to the contact is checked against the mesh itself, since cells next to
the surface are blocked by the clearance.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from ..geometry.mesh import TriMesh
from ..geometry.queries import segments_clear
from ..geometry.voxel import dilate, grid_for_bounds, occupancy_on_grid

CONTACT_PROBE = 1e-4  # contact endpoints are lifted off the surface by this much
APPROACH_CANDIDATES = 32
PULL_OPTIONS = 4


@njit(cache=True)
def grid_dijkstra(free, start, h):
    nx, ny, nz = free.shape
    n = nx * ny * nz
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, np.int64)
    flat = free.ravel()
    s = (start[0] * ny + start[1]) * nz + start[2]
    dist[s] = 0.0
    heap = [(0.0, s)]
    w = np.empty(27)
    for a in range(-1, 2):
        for b in range(-1, 2):
            for c in range(-1, 2):
                w[(a + 1) * 9 + (b + 1) * 3 + c + 1] = h * np.sqrt(a * a + b * b + c * c)
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        i = u // (ny * nz)
        j = (u // nz) % ny
        k = u % nz
        for a in range(-1, 2):
            ii = i + a
            if ii < 0 or ii >= nx:
                continue
            for b in range(-1, 2):
                jj = j + b
                if jj < 0 or jj >= ny:
                    continue
                for c in range(-1, 2):
                    kk = k + c
                    if kk < 0 or kk >= nz or (a == 0 and b == 0 and c == 0):
                        continue
                    v = (ii * ny + jj) * nz + kk
                    if not flat[v]:
                        continue
                    nd = d + w[(a + 1) * 9 + (b + 1) * 3 + c + 1]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = u
                        heapq.heappush(heap, (nd, v))
    return dist, pred


@njit(cache=True)
def _los(free, origin, h, p, q):
    """All cells met by segment p-q (sampled at h/4) are free."""
    nx, ny, nz = free.shape
    L = np.sqrt(((q - p) ** 2).sum())
    m = int(np.ceil(L / (0.25 * h))) + 1
    for s in range(m + 1):
        t = s / m
        x = p + t * (q - p)
        i = int(np.floor((x[0] - origin[0]) / h))
        j = int(np.floor((x[1] - origin[1]) / h))
        k = int(np.floor((x[2] - origin[2]) / h))
        if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
            return False
        if not free[i, j, k]:
            return False
    return True


@njit(cache=True)
def _pull_string(free, origin, h, pts):
    """Greedy shortcutting: from each kept vertex jump to the farthest visible one."""
    n = pts.shape[0]
    keep = np.empty(n, np.int64)
    keep[0] = 0
    m = 1
    i = 0
    while i < n - 1:
        j = n - 1
        while j > i + 1 and not _los(free, origin, h, pts[i], pts[j]):
            j -= 1
        keep[m] = j
        m += 1
        i = j
    return pts[keep[:m]].copy()


class FreeSpace:
    """Free-space voxel grid around an object resting on z = 0, rooted at the FFO."""

    def __init__(self, mesh: TriMesh, ffo, resolution: float = 0.005, clearance: int = 1,
                 margin: float | None = None):
        self.mesh = mesh
        self.ffo = np.asarray(ffo, dtype=float)
        self.h = float(resolution)
        lo = np.minimum(mesh.bounds[0], self.ffo)
        hi = np.maximum(mesh.bounds[1], self.ffo)
        if margin is None:
            margin = 0.25 * mesh.diagonal
        lo = lo - margin
        hi = hi + margin
        lo[2] = min(lo[2], -2 * self.h)
        grid = grid_for_bounds(lo, hi, self.h, pad=clearance + 1)
        occ = occupancy_on_grid(mesh, grid)
        centers_z = grid.origin[2] + (np.arange(grid.dims[2]) + 0.5) * self.h
        occ[:, :, centers_z < 0.0] = True
        free = ~dilate(occ, clearance)
        # keep the grid border blocked so paths never leave the domain
        free[[0, -1], :, :] = False
        free[:, [0, -1], :] = False
        free[:, :, [0, -1]] = False
        self.start = grid.world_to_index(self.ffo)
        if not grid.contains_index(self.start):
            raise ValueError("FFO lies outside the free-space grid")
        free[tuple(self.start)] = True
        self.grid = grid
        self.free = np.ascontiguousarray(free)
        self.dist, self.pred = grid_dijkstra(self.free, self.start.astype(np.int64), self.h)
        reach = np.flatnonzero(np.isfinite(self.dist))
        self._reach_ids = reach
        self._tree = cKDTree(grid.centers()[reach])

    def _cell_path(self, flat_id: int) -> np.ndarray:
        ids = []
        u = flat_id
        while u >= 0:
            ids.append(u)
            u = self.pred[u]
        ids.reverse()
        idx = np.stack(np.unravel_index(np.array(ids), self.grid.dims), axis=1)
        return self.grid.index_to_world(idx)

    def _approach_options(self, contact, normal):
        """Reachable free cells that see the contact directly; (cell ids, leg lengths)."""
        probe = np.asarray(contact, dtype=float) + CONTACT_PROBE * np.asarray(normal, dtype=float)
        k = min(APPROACH_CANDIDATES, len(self._reach_ids))
        if k == 0:
            return np.zeros(0, np.int64), np.zeros(0)
        d, j = self._tree.query(probe, k=k)
        d, j = np.atleast_1d(d), np.atleast_1d(j)
        ids = self._reach_ids[j]
        centers = self.grid.index_to_world(np.stack(np.unravel_index(ids, self.grid.dims), axis=1))
        ok = segments_clear(self.mesh, centers, np.broadcast_to(probe, centers.shape))
        ok &= centers[:, 2] > 0.0
        return ids[ok], np.linalg.norm(centers[ok] - contact, axis=1)

    def path_to(self, contact, normal) -> np.ndarray | None:
        """Shortened polyline from the FFO to ``contact``; None when unreachable."""
        contact = np.asarray(contact, dtype=float)
        ids, legs = self._approach_options(contact, normal)
        if len(ids) == 0:
            return None
        # string-pull only the few options that are best under the grid metric
        order = np.argsort(self.dist[ids] + legs, kind="stable")[:PULL_OPTIONS]
        best = None
        for cid, leg in zip(ids[order], legs[order]):
            pts = self._cell_path(int(cid))
            pts[0] = self.ffo
            pts = _pull_string(self.free, self.grid.origin, self.h, np.ascontiguousarray(pts))
            total = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum() + leg
            if best is None or total < best[0]:
                best = (total, pts)
        if best is None:
            return None
        return np.vstack([best[1], contact[None]])

    def length_to(self, contact, normal) -> float:
        p = self.path_to(contact, normal)
        if p is None:
            return np.inf
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())
