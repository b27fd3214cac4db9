"""Procedural watertight meshes used as fixtures and test objects."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh, merge_vertices


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned box, 12 triangles."""
    sx, sy, sz = np.asarray(size, dtype=float) / 2.0
    occ = np.ones((1, 1, 1), dtype=bool)
    c = np.asarray(center, dtype=float)
    return blocky_solid([c[0] - sx, c[0] + sx], [c[1] - sy, c[1] + sy], [c[2] - sz, c[2] + sz], occ)


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdivisions):
        v, f = _midpoint_subdivide(v, f)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    return TriMesh(v * radius + np.asarray(center, dtype=float), f)


def _midpoint_subdivide(v, f):
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    es = np.sort(e, axis=1)
    uniq, inv = np.unique(es, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = len(v) + inv.reshape(3, -1).T  # (F, 3): mid of (01, 12, 20)
    nv = np.concatenate([v, 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])])
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    ab, bc, ca = mids[:, 0], mids[:, 1], mids[:, 2]
    nf = np.concatenate([
        np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
        np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1),
    ])
    return nv, nf


def blocky_solid(xs, ys, zs, occupancy) -> TriMesh:
    """Boundary of a union of lattice cells.

    ``xs, ys, zs`` are increasing breakpoints; ``occupancy[i, j, k]`` marks
    the cell [xs[i], xs[i+1]] x [ys[j], ys[j+1]] x [zs[k], zs[k+1]]. Cells
    that touch only along an edge or corner produce a non-manifold surface;
    callers must avoid such layouts.
    """
    xs, ys, zs = (np.asarray(a, dtype=float) for a in (xs, ys, zs))
    occ = np.pad(np.asarray(occupancy, dtype=bool), 1)
    coords = [np.concatenate([[a[0] - 1], a, [a[-1] + 1]]) for a in (xs, ys, zs)]
    shape = tuple(len(c) for c in coords)

    def vid(i, j, k):
        return (i * shape[1] + j) * shape[2] + k

    quads = []
    for axis in range(3):
        lo = occ
        hi = np.roll(occ, -1, axis=axis)
        # face between cell c and c+1 along axis; outward normal is +axis
        # when c is solid, -axis when c+1 is solid
        for sign, mask in ((1, lo & ~hi), (-1, hi & ~lo)):
            for c in np.argwhere(mask):
                i, j, k = c
                p = [i, j, k]
                p[axis] += 1  # face lies on lattice plane index c[axis]+1
                u, w = [(1, 2), (2, 0), (0, 1)][axis]
                q0 = list(p)
                q1 = list(p); q1[u] += 1
                q2 = list(p); q2[u] += 1; q2[w] += 1
                q3 = list(p); q3[w] += 1
                quad = [vid(*q0), vid(*q1), vid(*q2), vid(*q3)]
                if sign < 0:
                    quad = quad[::-1]
                quads.append(quad)
    quads = np.array(quads, dtype=np.int64).reshape(-1, 4)
    faces = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]])
    used, inv = np.unique(faces, return_inverse=True)
    i, rem = np.divmod(used, shape[1] * shape[2])
    j, k = np.divmod(rem, shape[2])
    verts = np.stack([coords[0][i], coords[1][j], coords[2][k]], axis=1)
    v, f = merge_vertices(verts, inv.reshape(-1, 3))
    return TriMesh(v, f)
