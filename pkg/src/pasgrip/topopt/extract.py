"""Printable gripper surface from an optimized density field."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..geometry.mesh import TriMesh
from ..geometry.voxel import VoxelGrid, marching_cubes
from .volume import TopoptError

SMOOTH_SIGMA = 1.0
ISO = 0.5


def sphere_mask(grid: VoxelGrid, centers, radius: float) -> np.ndarray:
    c = grid.centers().reshape(grid.dims + (3,))
    m = np.zeros(grid.dims, dtype=bool)
    for p in np.asarray(centers, dtype=float).reshape(-1, 3):
        m |= np.linalg.norm(c - p, axis=-1) <= radius
    return m


def gripper_field(density: VoxelGrid, swept: np.ndarray, swept_dilated: np.ndarray, contacts,
                  sphere_r: float, sigma: float = SMOOTH_SIGMA, solid=None, iso: float = ISO) -> VoxelGrid:
    """Smoothed density with contact pads added and swept cells carved out.

    Away from the contacts the dilated swept volume is removed; inside the
    contact spheres only the exact swept cells are removed, so the pads can
    reach the object surface. ``solid`` cells (the mount) are kept whole.
    Smoothing only rounds the surface: cells already at or above ``iso``
    keep their value, so thin load-carrying members are not blurred away.
    """
    raw = np.asarray(density.values, dtype=float)
    field = ndimage.gaussian_filter(raw, sigma, mode="constant")
    field = np.where(raw >= iso, np.maximum(field, raw), field)
    if solid is not None:
        field = np.where(solid, 1.0, field)
    pads = sphere_mask(density, contacts, sphere_r)
    field = np.where(pads, 1.0, field)
    carve = np.where(pads, swept, swept_dilated)
    field[carve] = 0.0
    return density.with_values(field.astype(np.float32))


def extract_gripper(density: VoxelGrid, swept: np.ndarray, swept_dilated: np.ndarray, contacts,
                    sphere_r: float, iso: float = ISO, solid=None) -> TriMesh:
    field = gripper_field(density, swept, swept_dilated, contacts, sphere_r, solid=solid, iso=iso)
    mesh = marching_cubes(field, iso)
    if mesh.is_empty:
        raise TopoptError("empty isosurface; raise the volume fraction")
    return mesh
