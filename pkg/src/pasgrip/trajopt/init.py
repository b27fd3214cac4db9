"""Initial skeleton and insert trajectory for a grasp configuration."""

from __future__ import annotations

import numpy as np

from ..geometry.transform import RigidTransform
from ..grasp.contacts import GraspConfiguration
from ..grasp.freespace import FreeSpace
from ..kinematics import IKError, RobotModel, Trajectory, fk_matrices, forward_kinematics, inverse_kinematics
from .pathcost import PathCoster
from .problem import CONTACT_PROBE

FORWARD_DISTANCE = 0.5
# tool z along world +x, tool x pointing down
FORWARD_ROTATION = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
IK_SEEDS = (
    (0.0, -np.pi / 2, np.pi / 2, -np.pi / 2, -np.pi / 2, 0.0),
    (0.0, -np.pi / 2, np.pi / 2, 0.0, np.pi / 2, 0.0),
    (np.pi, -np.pi / 2, -np.pi / 2, -np.pi / 2, np.pi / 2, 0.0),
    (0.0, -2.0, 2.0, -1.5, -1.5, 0.0),
)


class InitError(RuntimeError):
    pass


def default_retreat(mesh) -> float:
    return max(0.3, 4.0 * mesh.bounding_sphere_radius)


def auto_forward_keyframe(robot: RobotModel, height: float) -> np.ndarray:
    """Joint state with the FFO 0.5 m ahead of the base, tool pointing forward.

    Several seeds are tried; the solution closest to zero (smallest norm) is
    kept so the choice does not depend on seed order.
    """
    base = robot.base_pose
    target = base @ RigidTransform(FORWARD_ROTATION, np.array([FORWARD_DISTANCE, 0.0, height]))
    sols, last = [], None
    for s in IK_SEEDS:
        try:
            sols.append(inverse_kinematics(robot, target, np.array(s), restarts=2))
        except IKError as e:
            last = e
    if not sols:
        raise last
    return min(sols, key=lambda q: (float(np.linalg.norm(q)), tuple(q)))


def init_trajectory(robot: RobotModel, grasp_q, retreat_dist: float, n: int = 4) -> Trajectory:
    """Straight retreat along the tool axis, interpolated linearly in joint space."""
    grasp_q = np.asarray(grasp_q, dtype=float)
    if n < 2:
        raise ValueError("need at least two keyframes")
    if retreat_dist == 0:
        return Trajectory(np.tile(grasp_q, (n, 1)))
    F = forward_kinematics(robot, grasp_q)
    axis = F.rotation[:, 2]
    retreat = RigidTransform(F.rotation, F.translation - retreat_dist * axis)
    q0 = inverse_kinematics(robot, retreat, grasp_q)
    s = np.linspace(0.0, 1.0, n)[:, None]
    return Trajectory((1.0 - s) * q0 + s * grasp_q)


def _probe_path(path, normal):
    p = np.array(path, dtype=float)
    p[-1] = p[-1] + CONTACT_PROBE * normal
    return p


def simplify_path(path, m: int, cost) -> np.ndarray | None:
    """Reduce a collision-free polyline to exactly m vertices keeping cost == 0.

    Greedy: repeatedly drop the interior vertex whose removal keeps the
    path free and adds the least length. Short paths are padded by splitting
    their longest segment.
    """
    P = [np.asarray(v, dtype=float) for v in path]
    while len(P) > m:
        best = None
        for i in range(1, len(P) - 1):
            cand = P[:i] + P[i + 1:]
            if cost(np.array(cand)) != 0.0:
                continue
            inc = (np.linalg.norm(P[i + 1] - P[i - 1]) - np.linalg.norm(P[i] - P[i - 1])
                   - np.linalg.norm(P[i + 1] - P[i]))
            if best is None or inc < best[0]:
                best = (inc, i)
        if best is None:
            return None
        del P[best[1]]
    while len(P) < m:
        seg = [np.linalg.norm(b - a) for a, b in zip(P[:-1], P[1:])]
        i = int(np.argmax(seg))
        P.insert(i + 1, 0.5 * (P[i] + P[i + 1]))
    out = np.array(P)
    return out if cost(out) == 0.0 else None


def init_skeleton(gc: GraspConfiguration, free_space: FreeSpace, coster: PathCoster, m: int = 4) -> np.ndarray:
    """Three m-joint fingers from the FFO to the contacts, each collision-free."""
    fingers = []
    for c in gc.contacts:
        path = free_space.path_to(c.position, c.normal)
        if path is None:
            raise InitError("no free path from the FFO to a contact")

        def cost(p, n=c.normal):
            return coster.path_cost(_probe_path(p, n))

        if cost(path) != 0.0:
            raise InitError("free-space path collides with the object")
        f = simplify_path(path, m, cost)
        if f is None:
            raise InitError(f"cannot simplify a finger to {m} collision-free joints")
        f[0] = free_space.ffo
        f[-1] = c.position
        fingers.append(f)
    return np.stack(fingers)


def ffo_position(robot: RobotModel, q) -> np.ndarray:
    return fk_matrices(robot, np.asarray(q, dtype=float))[:3, 3]
