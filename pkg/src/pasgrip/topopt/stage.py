"""Topology-optimization stage for one verified skeleton + trajectory."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..geometry.mesh import TriMesh
from ..geometry.voxel import VoxelGrid
from ..grasp.contacts import GraspConfiguration
from ..grasp.stability import balancing_forces
from ..kinematics import RobotModel, fk_matrices
from .extract import extract_gripper
from .simp import PENAL, simp_optimize
from .volume import TopoptError, boundary_conditions, collision_free_volume

log = logging.getLogger(__name__)


@dataclass
class TopoptParams:
    voxel_size: float = 0.002
    volume_fraction: float = 0.1
    penal: float = PENAL
    iters: int = 60
    sphere_cells: float = 2.0  # contact pad radius, in voxels

    @property
    def sphere_r(self) -> float:
        return self.sphere_cells * self.voxel_size


@dataclass
class TopoptResult:
    gripper: TriMesh
    density: VoxelGrid
    free: VoxelGrid
    swept: np.ndarray
    compliance_history: list
    volume_history: list


def contact_loads(gc: GraspConfiguration, com, torque_scale: float) -> np.ndarray:
    """Load on the gripper at each contact, directed along -normal, total magnitude 1.

    Magnitudes blend an even split with the least-force gravity balance so
    no contact is left unloaded.
    """
    n = gc.normals
    share = np.full(3, 1.0 / 3.0)
    F = balancing_forces(gc.contacts, com, torque_scale=torque_scale)
    if F is not None:
        normal = np.maximum(0.0, -np.einsum("ij,ij->i", F, n))
        if normal.sum() > 0:
            share = 0.5 * share + 0.5 * normal / normal.sum()
    return -n * share[:, None]


def run_topopt(mesh: TriMesh, robot: RobotModel, gc: GraspConfiguration, skeleton, keyframes,
               params: TopoptParams | None = None) -> TopoptResult:
    p = params or TopoptParams()
    skeleton = np.asarray(skeleton, dtype=float)
    grasp = fk_matrices(robot, np.asarray(keyframes, dtype=float)[-1])
    domain = collision_free_volume(mesh, keyframes, robot, p.voxel_size, skeleton, approach_axis=grasp[:3, 2])
    loads = contact_loads(gc, mesh.center_of_mass, mesh.bounding_sphere_radius)
    bc, comp = boundary_conditions(domain, skeleton[0, 0], gc.positions, loads)
    log.info("stage=topopt cells=%d design=%d fixed=%d", int(np.prod(domain.grid.dims)), int(comp.sum()),
             len(bc.fixed_cells))
    try:
        # the clamped ball is the mount block: solid, and outside the volume budget
        res = simp_optimize(comp, bc.fixed_cells, bc.load_cells, bc.load_forces, p.volume_fraction,
                            p.penal, p.iters, solid_cells=bc.fixed_cells)
    except ValueError as e:
        raise TopoptError(str(e)) from e
    density = domain.grid.with_values(res.density.astype(np.float32))
    mount = np.zeros(domain.grid.dims, dtype=bool)
    mount[tuple(bc.fixed_cells.T)] = True
    gripper = extract_gripper(density, domain.swept, domain.swept_dilated, gc.positions, p.sphere_r, solid=mount)
    log.info("stage=topopt compliance=%.6g gripper_faces=%d", res.compliance_history[-1], len(gripper.faces))
    return TopoptResult(gripper, density, domain.grid, domain.swept, res.compliance_history,
                        res.volume_history)
