"""Regular voxel grids: voxelization, swept volumes, isosurfaces, persistence."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .mesh import TriMesh, merge_vertices
from .queries import points_inside
from .transform import RigidTransform

_HEADER = struct.Struct("<3dd3i")
CUBE26 = np.ones((3, 3, 3), dtype=bool)


@dataclass
class VoxelGrid:
    """Scalar field on cell centers.

    ``origin`` is the minimum corner of cell (0, 0, 0); cell (i, j, k) has its
    center at ``origin + (ijk + 0.5) * voxel_size``.
    """

    origin: np.ndarray
    voxel_size: float
    values: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.voxel_size = float(self.voxel_size)
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError("values must be a non-empty 3D array")

    @property
    def dims(self) -> tuple:
        return tuple(int(d) for d in self.values.shape)

    @property
    def cell_volume(self) -> float:
        return self.voxel_size ** 3

    def centers(self) -> np.ndarray:
        """All cell centers, (nx*ny*nz, 3) in C order."""
        axes = [self.origin[a] + (np.arange(n) + 0.5) * self.voxel_size for a, n in enumerate(self.dims)]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack([c.reshape(-1) for c in g], axis=1)

    def index_to_world(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.voxel_size

    def world_to_index(self, p) -> np.ndarray:
        return np.floor((np.asarray(p, dtype=float) - self.origin) / self.voxel_size).astype(np.int64)

    def contains_index(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        return np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=-1)

    def with_values(self, values) -> "VoxelGrid":
        return VoxelGrid(self.origin.copy(), self.voxel_size, values)

    def occupied_volume(self) -> float:
        return float(np.count_nonzero(self.values > 0.5)) * self.cell_volume

    def save(self, path) -> None:
        """Header (origin, voxel_size, dims; little-endian) + row-major float32."""
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(*self.origin, self.voxel_size, *self.dims))
            fh.write(np.ascontiguousarray(self.values, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "VoxelGrid":
        data = Path(path).read_bytes()
        ox, oy, oz, vs, nx, ny, nz = _HEADER.unpack_from(data, 0)
        vals = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=nx * ny * nz)
        return cls(np.array([ox, oy, oz]), vs, vals.reshape(nx, ny, nz).astype(np.float32))


def grid_for_bounds(lo, hi, voxel_size: float, pad: int = 1) -> VoxelGrid:
    """Empty grid covering [lo, hi] (centered), padded by ``pad`` cells."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = np.maximum(np.ceil((hi - lo) / voxel_size - 1e-9).astype(int), 1)
    origin = 0.5 * (lo + hi) - 0.5 * n * voxel_size - pad * voxel_size
    return VoxelGrid(origin, voxel_size, np.zeros(tuple(n + 2 * pad), dtype=np.float32))


def occupancy_on_grid(mesh: TriMesh, grid: VoxelGrid, pose: RigidTransform | None = None) -> np.ndarray:
    """Boolean occupancy of ``pose * mesh`` on ``grid`` by center containment.

    Only cells inside the posed mesh's bounding box are tested.
    """
    occ = np.zeros(grid.dims, dtype=bool)
    if pose is not None:
        verts = pose.apply(mesh.vertices)
    else:
        verts = mesh.vertices
    lo = grid.world_to_index(verts.min(axis=0))
    hi = grid.world_to_index(verts.max(axis=0)) + 1
    lo = np.clip(lo, 0, grid.dims)
    hi = np.clip(hi, 0, grid.dims)
    if np.any(hi <= lo):
        return occ
    axes = [grid.origin[a] + (np.arange(lo[a], hi[a]) + 0.5) * grid.voxel_size for a in range(3)]
    g = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([c.reshape(-1) for c in g], axis=1)
    if pose is not None:
        pts = pose.inverse().apply(pts)
    inside = points_inside(mesh, pts).reshape(g[0].shape)
    occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = inside
    return occ


def voxelize(mesh: TriMesh, voxel_size: float) -> VoxelGrid:
    """Cells whose centers lie inside the mesh; one empty cell of padding."""
    lo, hi = mesh.bounds
    grid = grid_for_bounds(lo, hi, voxel_size, pad=1)
    grid.values = occupancy_on_grid(mesh, grid).astype(np.float32)
    return grid


def dilate(occ: np.ndarray, cells: int = 1) -> np.ndarray:
    if cells <= 0:
        return occ.copy()
    return ndimage.binary_dilation(occ, structure=CUBE26, iterations=cells)


def swept_volume_grid(mesh: TriMesh, poses, voxel_size: float, grid: VoxelGrid | None = None,
                      dilation: int = 1) -> VoxelGrid:
    """Union of the per-pose voxelizations, dilated by ``dilation`` cells.

    Consecutive poses are expected to move the mesh by at most one voxel;
    the caller densifies. ``grid`` fixes the output lattice (otherwise a grid
    covering every posed mesh plus padding is created).
    """
    poses = list(poses)
    if not poses:
        raise ValueError("swept volume needs at least one pose")
    if grid is None:
        allv = np.concatenate([p.apply(mesh.vertices) for p in poses])
        grid = grid_for_bounds(allv.min(axis=0), allv.max(axis=0), voxel_size, pad=1 + dilation)
    occ = np.zeros(grid.dims, dtype=bool)
    for p in poses:
        occ |= occupancy_on_grid(mesh, grid, p)
    occ = dilate(occ, dilation)
    return grid.with_values(occ.astype(np.float32))


def marching_cubes(grid: VoxelGrid, iso: float = 0.5) -> TriMesh:
    """Isosurface of the cell-center field; empty mesh if nothing crosses.

    The field is zero-padded so the surface is always closed.
    """
    from skimage import measure

    if not 0.0 < iso < 1.0:
        raise ValueError("iso must lie in (0, 1)")
    vals = np.pad(np.asarray(grid.values, dtype=np.float64), 1)
    if not (vals.max() > iso and vals.min() < iso):
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = measure.marching_cubes(vals, level=iso, spacing=(grid.voxel_size,) * 3,
                                                allow_degenerate=False)
    verts = verts + grid.origin + (0.5 - 1.0) * grid.voxel_size
    verts, faces = merge_vertices(verts, faces, tol=1e-9 * grid.voxel_size)
    mesh = TriMesh(verts, faces)
    if mesh.volume < 0:
        mesh = TriMesh(verts, faces[:, ::-1])
    return mesh
