"""Synthetic test objects and their placement in front of the default robot.

Each object is a union of axis-aligned boxes minus another set of boxes,
meshed on the lattice spanned by all box faces. Local frames put the floor
at z = 0 and the face seen by the robot at x = 0; placements shift them in
front of the auto-forward FFO (0.5 m ahead of the base).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry.mesh import TriMesh, save_obj
from .geometry.primitives import blocky_solid, icosphere

Box = tuple  # ((x0, y0, z0), (x1, y1, z1))

# desk-scale settings: coarser sampling and voxels, smaller CRS population and budget
DESK = {
    "trajopt": {"population": 2000, "budget": 100000, "d_sub": 0.002, "d_lin": 0.002},
    "topopt": {"voxel_size": 0.005},
}


def boxes_solid(add: list, sub: list = ()) -> TriMesh:
    """Mesh of (union of ``add``) minus (union of ``sub``) for axis-aligned boxes."""
    breaks = [sorted({b[s][a] for b in list(add) + list(sub) for s in (0, 1)}) for a in range(3)]
    centers = [0.5 * (np.array(br[1:]) + np.array(br[:-1])) for br in breaks]
    g = np.meshgrid(*centers, indexing="ij")

    def inside(boxes):
        m = np.zeros(g[0].shape, dtype=bool)
        for lo, hi in boxes:
            m |= ((g[0] > lo[0]) & (g[0] < hi[0]) & (g[1] > lo[1]) & (g[1] < hi[1])
                  & (g[2] > lo[2]) & (g[2] < hi[2]))
        return m

    return blocky_solid(*breaks, inside(add) & ~inside(sub))


def notched_box() -> TriMesh:
    """Block with a blind pallet-style slot in its front face."""
    return boxes_solid([((0, -0.06, 0), (0.12, 0.06, 0.16))],
                       [((-0.01, -0.035, 0.05), (0.08, 0.035, 0.11))])


def l_hole_key() -> TriMesh:
    """Block pierced front-to-back by an L-shaped keyhole."""
    return boxes_solid([((0, -0.06, 0), (0.10, 0.06, 0.14))],
                       [((-0.01, -0.0125, 0.04), (0.11, 0.05, 0.065)),
                        ((-0.01, -0.0125, 0.04), (0.11, 0.0125, 0.11))])


def handle_cup() -> TriMesh:
    """Open-top cup with an arched handle spanning its opening side to side."""
    body = [((0, -0.045, 0), (0.09, 0.045, 0.08))]
    arch = [((0.03, -0.045, 0.08), (0.06, -0.035, 0.13)),
            ((0.03, 0.035, 0.08), (0.06, 0.045, 0.13)),
            ((0.03, -0.045, 0.12), (0.06, 0.045, 0.13))]
    cavity = [((0.01, -0.035, 0.01), (0.08, 0.035, 0.09))]
    return boxes_solid(body + arch, cavity)


@dataclass(frozen=True)
class Fixture:
    name: str
    mesh: TriMesh
    translation: tuple  # object-frame origin in the world
    retreat_dist: float = 0.25


def fixtures() -> dict:
    return {
        "notched_box": Fixture("notched_box", notched_box(), (0.535, 0.0, 0.0)),
        "l_hole_key": Fixture("l_hole_key", l_hole_key(), (0.535, 0.0, 0.0)),
        "handle_cup": Fixture("handle_cup", handle_cup(), (0.535, 0.0, 0.0)),
    }


def write_fixture_config(fx: Fixture, out_dir, **overrides) -> Path:
    """Write the fixture mesh and a pipeline config next to it; returns the config path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh_path = out_dir / f"{fx.name}.obj"
    save_obj(fx.mesh, mesh_path)
    cfg = {
        "object_mesh_path": str(mesh_path),
        "object_pose": {"rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": list(fx.translation)},
        "grasp_keyframe": "auto-forward",
        "output_dir": str(out_dir / "out"),
        "seed": 0,
        "trajopt": {"retreat_dist": fx.retreat_dist},
    }
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = v
    path = out_dir / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


def floor_sphere(radius: float = 0.05) -> TriMesh:
    """Sphere resting on the floor (for the no-candidate case)."""
    return icosphere(3, radius, (0.0, 0.0, radius))
