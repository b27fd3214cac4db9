"""Triangle meshes: storage, I/O, BVH, and whole-mesh properties."""

from __future__ import annotations

import struct
from functools import cached_property
from pathlib import Path

import numpy as np

from .transform import RigidTransform

LEAF_SIZE = 4


class MeshError(ValueError):
    pass


class TriMesh:
    """Watertight, outward-oriented triangle mesh (units: meters).

    Immutable after construction; derived data (normals, BVH) is built lazily
    and cached, so one instance can be shared read-only between workers.
    """

    def __init__(self, vertices, faces):
        v = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        f = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        self.vertices = v
        self.faces = f

    def __len__(self):
        return len(self.faces)

    def __repr__(self):
        return f"TriMesh(V={len(self.vertices)}, F={len(self.faces)})"

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    @cached_property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    @cached_property
    def _cross(self) -> np.ndarray:
        t = self.triangles
        return np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        c = self._cross
        n = np.linalg.norm(c, axis=1, keepdims=True)
        return np.divide(c, n, out=np.zeros_like(c), where=n > 0)

    @cached_property
    def bounds(self) -> np.ndarray:
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @property
    def diagonal(self) -> float:
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def volume(self) -> float:
        t = self.triangles
        return float(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum() / 6.0)

    @cached_property
    def center_of_mass(self) -> np.ndarray:
        """Uniform-density centroid from signed tetrahedra about the origin."""
        t = self.triangles
        vol = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])) / 6.0
        total = vol.sum()
        if abs(total) < 1e-300:
            raise MeshError("zero-volume mesh has no center of mass")
        return (vol[:, None] * t.sum(axis=1) / 4.0).sum(axis=0) / total

    @cached_property
    def bounding_sphere_radius(self) -> float:
        """Radius of the sphere about the center of mass enclosing the mesh."""
        return float(np.linalg.norm(self.vertices - self.center_of_mass, axis=1).max())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2), sorted vertex pairs."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def is_watertight(self) -> bool:
        """Every directed edge appears once and its reverse exactly once."""
        if self.is_empty:
            return False
        d = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        n = len(self.vertices)
        key = d[:, 0] * n + d[:, 1]
        rkey = d[:, 1] * n + d[:, 0]
        if len(np.unique(key)) != len(key):
            return False
        return bool(np.isin(rkey, key).all())

    def transformed(self, T: RigidTransform) -> "TriMesh":
        return TriMesh(T.apply(self.vertices), self.faces)

    def scaled(self, s: float) -> "TriMesh":
        return TriMesh(self.vertices * s, self.faces)

    @cached_property
    def kernel_data(self) -> tuple:
        """Packed arrays consumed by the numba kernels (see ``_kernels``)."""
        if self.is_empty:
            raise MeshError("empty mesh")
        t = self.triangles
        v0 = np.ascontiguousarray(t[:, 0])
        e1 = np.ascontiguousarray(t[:, 1] - t[:, 0])
        e2 = np.ascontiguousarray(t[:, 2] - t[:, 0])
        nrm = np.ascontiguousarray(self.face_normals)
        return (v0, e1, e2, nrm) + build_bvh(t)


def build_bvh(tris: np.ndarray, leaf_size: int = LEAF_SIZE) -> tuple:
    """Median-split BVH over triangle centroids.

    Returns (bmin, bmax, left, right, start, count, order); node 0 is the root.
    """
    lo_t = tris.min(axis=1)
    hi_t = tris.max(axis=1)
    cen = tris.mean(axis=1)
    pad = 1e-9 * max(1.0, float(np.abs(tris).max()))
    order = np.arange(len(tris))
    bmin, bmax, left, right, start, count = [], [], [], [], [], []

    def new_node():
        bmin.append(None); bmax.append(None)
        left.append(-1); right.append(-1); start.append(0); count.append(0)
        return len(bmin) - 1

    root = new_node()
    work = [(root, 0, len(tris))]
    while work:
        node, a, b = work.pop()
        idx = order[a:b]
        bmin[node] = lo_t[idx].min(axis=0) - pad
        bmax[node] = hi_t[idx].max(axis=0) + pad
        if b - a <= leaf_size:
            start[node] = a
            count[node] = b - a
            continue
        c = cen[idx]
        ax = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (b - a) // 2
        part = np.argpartition(c[:, ax], mid)
        order[a:b] = idx[part]
        l_node = new_node()
        r_node = new_node()
        left[node] = l_node
        right[node] = r_node
        work.append((l_node, a, a + mid))
        work.append((r_node, a + mid, b))
    return (
        np.ascontiguousarray(np.array(bmin, dtype=np.float64)),
        np.ascontiguousarray(np.array(bmax, dtype=np.float64)),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(start, dtype=np.int64),
        np.array(count, dtype=np.int64),
        order.astype(np.int64),
    )


def merge_vertices(vertices, faces, tol: float = 1e-9):
    """Weld coincident vertices (quantized to ``tol``) and drop degenerate faces."""
    v = np.asarray(vertices, dtype=float)
    q = np.round(v / tol).astype(np.int64)
    _, first, inv = np.unique(q, axis=0, return_index=True, return_inverse=True)
    f = inv.reshape(-1)[np.asarray(faces)]
    keep = (f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 2] != f[:, 0])
    return v[first], f[keep]


def load_mesh(path, scale: float = 1.0) -> TriMesh:
    """Read OBJ or binary STL; ``scale`` converts file units to meters."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        v, f = _read_obj(path)
    elif suffix == ".stl":
        v, f = _read_stl(path)
    else:
        raise MeshError(f"unsupported mesh format: {path.suffix}")
    return TriMesh(np.asarray(v) * scale, f)


def _read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(x) for x in line.split()[1:4]])
            elif line.startswith("f "):
                idx = [int(tok.split("/")[0]) for tok in line.split()[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_stl(path):
    data = Path(path).read_bytes()
    if len(data) < 84:
        raise MeshError("truncated STL")
    (n,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * n:
        raise MeshError("truncated binary STL (ASCII STL is not supported)")
    rec = np.frombuffer(data, dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("a", "<u2")]),
                        count=n, offset=84)
    tri = rec["v"].astype(np.float64).reshape(-1, 3)
    return merge_vertices(tri, np.arange(3 * n).reshape(-1, 3))


def save_obj(mesh: TriMesh, path) -> None:
    lines = ["v " + " ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def save_polylines_obj(polylines, path) -> None:
    """Write polylines as OBJ ``l`` elements (one per polyline)."""
    lines, lines_l, base = [], [], 1
    for pl in polylines:
        pl = np.asarray(pl, dtype=float).reshape(-1, 3)
        lines += ["v " + " ".join(repr(float(c)) for c in v) for v in pl]
        lines_l.append("l " + " ".join(str(base + i) for i in range(len(pl))))
        base += len(pl)
    Path(path).write_text("\n".join(lines + lines_l) + "\n")


def save_stl(mesh: TriMesh, path) -> None:
    rec = np.zeros(len(mesh.faces), dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("a", "<u2")]))
    rec["n"] = mesh.face_normals
    rec["v"] = mesh.triangles
    with open(path, "wb") as fh:
        fh.write(b"\0" * 80)
        fh.write(struct.pack("<I", len(rec)))
        fh.write(rec.tobytes())


def sample_surface_points(mesh: TriMesh, count: int, seed: int):
    """Area-weighted uniform samples; returns (points, normals, face ids)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    areas = mesh.face_areas
    total = areas.sum()
    if not total > 0:
        raise MeshError("cannot sample a zero-area mesh")
    rng = np.random.default_rng(seed)
    face = rng.choice(len(areas), size=count, p=areas / total)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    t = mesh.triangles[face]
    pts = ((1 - r1)[:, None] * t[:, 0] + (r1 * (1 - r2))[:, None] * t[:, 1]
           + (r1 * r2)[:, None] * t[:, 2])
    return pts, mesh.face_normals[face].copy(), face
