"""Design domain: the space the object never sweeps through while leaving the gripper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..geometry.mesh import TriMesh
from ..geometry.transform import RigidTransform
from ..geometry.voxel import VoxelGrid, dilate, grid_for_bounds, occupancy_on_grid
from ..kinematics import RobotModel, Trajectory, fk_matrices, interpolate

FIX_RADIUS = 0.03
DESIGN_MARGIN = 0.01
MAX_REFINE_ROUNDS = 40

FACE6 = ndimage.generate_binary_structure(3, 1)


class TopoptError(RuntimeError):
    pass


def object_poses_in_gripper(mesh: TriMesh, robot: RobotModel, keyframes, step: float) -> list:
    """Poses M(t)^-1 of the object relative to the gripper (grasp frame), t from 1 to 0.

    Times are bisected until no mesh vertex moves more than ``step`` between
    consecutive poses; for a rigid motion the vertex maximum bounds the whole body.
    """
    traj = Trajectory(np.asarray(keyframes, dtype=float))
    F1_inv = np.linalg.inv(fk_matrices(robot, traj.keyframes[-1]))
    V = np.c_[mesh.vertices, np.ones(len(mesh.vertices))]

    def inv_motion(t):
        M = fk_matrices(robot, interpolate(traj, t)) @ F1_inv
        return np.linalg.inv(M)

    t = np.linspace(0.0, 1.0, traj.n)
    for _ in range(MAX_REFINE_ROUNDS):
        Minv = inv_motion(t)
        P = np.einsum("tij,kj->tki", Minv[:, :3, :], V)
        move = np.linalg.norm(np.diff(P, axis=0), axis=2).max(axis=1)
        bad = move > step
        if not bad.any():
            break
        t = np.sort(np.concatenate([t, 0.5 * (t[:-1] + t[1:])[bad]]))
    Minv = inv_motion(t[::-1])
    return [RigidTransform.from_matrix(M) for M in Minv]


def design_grid(skeleton, voxel_size: float, margin: float = DESIGN_MARGIN, fix_radius: float = FIX_RADIUS) -> VoxelGrid:
    """Box around the skeleton, grown to hold the mount ball at the FFO."""
    pts = np.asarray(skeleton, dtype=float).reshape(-1, 3)
    ffo = pts[0]
    lo = np.minimum(pts.min(axis=0) - margin, ffo - fix_radius)
    hi = np.maximum(pts.max(axis=0) + margin, ffo + fix_radius)
    return grid_for_bounds(lo, hi, voxel_size, pad=1)


@dataclass
class DesignDomain:
    grid: VoxelGrid  # values: 1 = free (design) cell
    swept: np.ndarray  # undilated swept occupancy
    swept_dilated: np.ndarray


def collision_free_volume(mesh: TriMesh, keyframes, robot: RobotModel, voxel_size: float, skeleton,
                          approach_axis=None, dilation: int = 1) -> DesignDomain:
    """Free cells of the design box: complement of the dilated swept volume.

    When ``approach_axis`` is given, cells behind the flange plane (where the
    robot itself sits) are excluded too. Interior skeleton joints and the FFO
    must land in cells the object never occupies.
    """
    skel = np.asarray(skeleton, dtype=float)
    grid = design_grid(skel, voxel_size)
    poses = object_poses_in_gripper(mesh, robot, keyframes, voxel_size)
    occ = np.zeros(grid.dims, dtype=bool)
    for p in poses:
        occ |= occupancy_on_grid(mesh, grid, p)
    occ_d = dilate(occ, dilation)
    free = ~occ_d
    if approach_axis is not None:
        c = grid.centers().reshape(grid.dims + (3,))
        ax = np.asarray(approach_axis, dtype=float)
        free &= ((c - skel[0, 0]) @ ax) >= -0.5 * voxel_size
    free[[0, -1], :, :] = False
    free[:, [0, -1], :] = False
    free[:, :, [0, -1]] = False
    joints = skel[:, :-1].reshape(-1, 3)
    idx = grid.world_to_index(joints)
    if not np.all(grid.contains_index(idx)) or occ[tuple(idx.T)].any():
        raise TopoptError("a skeleton joint lies in the swept volume; trajectory verification and "
                          "voxel resolution disagree")
    return DesignDomain(grid.with_values(free.astype(np.float32)), occ, occ_d)


@dataclass
class BoundaryConditions:
    fixed_cells: np.ndarray  # (k, 3)
    load_cells: np.ndarray  # (3, 3)
    load_forces: np.ndarray  # (3, 3)


def boundary_conditions(domain: DesignDomain, ffo, contacts, forces, fix_radius: float = FIX_RADIUS):
    """Fix free cells near the FFO; load the free cell nearest each contact.

    Load cells are searched within the 6-connected free component that holds
    the fixed cells, so a load path always exists.
    """
    grid = domain.grid
    free = grid.values > 0.5
    c = grid.centers().reshape(grid.dims + (3,))
    near = free & (np.linalg.norm(c - np.asarray(ffo, dtype=float), axis=-1) <= fix_radius)
    if not near.any():
        raise TopoptError("no free cell around the FFO to fix")
    lab, _ = ndimage.label(free, structure=FACE6)
    ids, counts = np.unique(lab[near], return_counts=True)
    comp = lab == ids[np.argmax(counts)]
    fixed = near & comp
    cells = np.argwhere(comp)
    centers = c[comp]
    loads = []
    for p in np.asarray(contacts, dtype=float):
        loads.append(cells[int(np.argmin(np.linalg.norm(centers - p, axis=1)))])
    return BoundaryConditions(np.argwhere(fixed), np.array(loads), np.asarray(forces, dtype=float)), comp
