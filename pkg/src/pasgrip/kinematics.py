"""Serial-arm kinematics (standard DH), IK, and joint-space trajectories."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry.transform import RigidTransform, rotation_log

IK_DAMPING = 1e-3
IK_MAX_ITERS = 500
IK_POS_TOL = 1e-4
IK_ROT_TOL = 1e-3
IK_MAX_STEP = 0.5  # rad, per-iteration cap on the joint update


class IKError(RuntimeError):
    def __init__(self, msg, position_error: float, rotation_error: float, q=None):
        super().__init__(f"{msg} (position residual {position_error:.3g} m, "
                         f"rotation residual {rotation_error:.3g} rad)")
        self.position_error = position_error
        self.rotation_error = rotation_error
        self.q = q


@dataclass(frozen=True)
class RobotModel:
    dh: np.ndarray  # (d, 4): a, alpha, d, theta_offset
    joint_limits: np.ndarray  # (d, 2)
    base_pose: RigidTransform = field(default_factory=RigidTransform)
    name: str = "robot"

    def __post_init__(self):
        dh = np.asarray(self.dh, dtype=float).reshape(-1, 4)
        lim = np.asarray(self.joint_limits, dtype=float).reshape(-1, 2)
        if len(lim) != len(dh):
            raise ValueError("one joint-limit pair per DH row is required")
        if np.any(lim[:, 0] >= lim[:, 1]):
            raise ValueError("joint limits must satisfy lower < upper")
        object.__setattr__(self, "dh", dh)
        object.__setattr__(self, "joint_limits", lim)

    @property
    def dof(self) -> int:
        return len(self.dh)

    @property
    def reach(self) -> float:
        return float(np.abs(self.dh[:, 0]).sum() + np.abs(self.dh[:, 2]).sum())

    def within_limits(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.joint_limits[:, 0]) and np.all(q <= self.joint_limits[:, 1]))

    @classmethod
    def from_dict(cls, d: dict) -> "RobotModel":
        return cls(np.asarray(d["dh"], dtype=float), np.asarray(d["joint_limits_rad"], dtype=float),
                   RigidTransform.from_dict(d.get("base_pose", {})), d.get("name", "robot"))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dh": self.dh.tolist(),
            "joint_limits_rad": self.joint_limits.tolist(),
            "base_pose": self.base_pose.to_dict(),
        }

    @classmethod
    def load(cls, path) -> "RobotModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_robot() -> RobotModel:
    text = resources.files("pasgrip.data").joinpath("ur5.json").read_text()
    return RobotModel.from_dict(json.loads(text))


def dh_matrices(dh: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-joint DH transforms, shape (..., d, 4, 4)."""
    q = np.asarray(q, dtype=float)
    a, alpha, d, off = dh.T
    th = q + off
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(alpha), np.sin(alpha)
    shape = th.shape
    A = np.zeros(shape + (4, 4))
    A[..., 0, 0] = ct
    A[..., 0, 1] = -st * ca
    A[..., 0, 2] = st * sa
    A[..., 0, 3] = a * ct
    A[..., 1, 0] = st
    A[..., 1, 1] = ct * ca
    A[..., 1, 2] = -ct * sa
    A[..., 1, 3] = a * st
    A[..., 2, 1] = np.broadcast_to(sa, shape)
    A[..., 2, 2] = np.broadcast_to(ca, shape)
    A[..., 2, 3] = np.broadcast_to(d, shape)
    A[..., 3, 3] = 1.0
    return A


def fk_matrices(model: RobotModel, q) -> np.ndarray:
    """Flange poses as 4x4 matrices for q of shape (..., d)."""
    A = dh_matrices(model.dh, q)
    T = np.broadcast_to(model.base_pose.matrix(), A.shape[:-3] + (4, 4)).copy()
    for i in range(model.dof):
        T = T @ A[..., i, :, :]
    return T


def forward_kinematics(model: RobotModel, q) -> RigidTransform:
    """Flange frame origin (FFO) pose for one joint vector."""
    return RigidTransform.from_matrix(fk_matrices(model, np.asarray(q, dtype=float)))


def jacobian(model: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian (6 x d) in the world frame: rows [v; w]."""
    A = dh_matrices(model.dh, np.asarray(q, dtype=float))
    T = model.base_pose.matrix()
    frames = [T]
    for i in range(model.dof):
        T = T @ A[i]
        frames.append(T)
    on = frames[-1][:3, 3]
    J = np.zeros((6, model.dof))
    for i in range(model.dof):
        z = frames[i][:3, 2]
        o = frames[i][:3, 3]
        J[:3, i] = np.cross(z, on - o)
        J[3:, i] = z
    return J


def pose_error(model: RobotModel, q, target: RigidTransform) -> np.ndarray:
    T = fk_matrices(model, np.asarray(q, dtype=float))
    e = np.empty(6)
    e[:3] = target.translation - T[:3, 3]
    e[3:] = rotation_log(target.rotation @ T[:3, :3].T)
    return e


def _dls(model, target, q, iters):
    lo, hi = model.joint_limits.T
    for _ in range(iters):
        e = pose_error(model, q, target)
        if np.linalg.norm(e[:3]) < 1e-12 and np.linalg.norm(e[3:]) < 1e-12:
            break
        J = jacobian(model, q)
        dq = J.T @ np.linalg.solve(J @ J.T + IK_DAMPING * np.eye(6), e)
        step = np.abs(dq).max()
        if step > IK_MAX_STEP:
            dq *= IK_MAX_STEP / step
        q = np.clip(q + dq, lo, hi)
    e = pose_error(model, q, target)
    return q, float(np.linalg.norm(e[:3])), float(np.linalg.norm(e[3:]))


def inverse_kinematics(model: RobotModel, target: RigidTransform, q_init, restarts: int = 8,
                       seed: int = 0) -> np.ndarray:
    """Damped least squares on the 6D pose error with joint-limit clamping.

    When the first attempt stalls, deterministic random restarts around
    ``q_init`` are tried. Raises ``IKError`` carrying the best residual.
    """
    if not (np.all(np.isfinite(target.translation)) and np.all(np.isfinite(target.rotation))):
        raise ValueError("IK target must be finite")
    lo, hi = model.joint_limits.T
    q0 = np.clip(np.asarray(q_init, dtype=float), lo, hi)
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(restarts + 1):
        start = q0 if attempt == 0 else np.clip(q0 + rng.uniform(-np.pi, np.pi, model.dof), lo, hi)
        q, ep, er = _dls(model, target, start, IK_MAX_ITERS)
        if ep <= IK_POS_TOL and er <= IK_ROT_TOL:
            return q
        if best is None or ep + er < best[1] + best[2]:
            best = (q, ep, er)
    raise IKError("inverse kinematics did not converge", best[1], best[2], best[0])


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear joint-space path over uniformly spaced keyframes."""

    keyframes: np.ndarray  # (n, d); first = retreat state, last = grasp state

    def __post_init__(self):
        k = np.asarray(self.keyframes, dtype=float)
        if k.ndim != 2 or len(k) < 2:
            raise ValueError("a trajectory needs at least two keyframes")
        object.__setattr__(self, "keyframes", k)

    @property
    def n(self) -> int:
        return len(self.keyframes)

    def __call__(self, t):
        return interpolate(self, t)


def interpolate(traj: Trajectory, t):
    """Joint vector(s) at t in [0, 1]; t may be a scalar or an array."""
    k = traj.keyframes
    t = np.asarray(t, dtype=float)
    s = np.clip(t, 0.0, 1.0) * (len(k) - 1)
    i = np.minimum(np.floor(s).astype(int), len(k) - 2)
    w = (s - i)[..., None]
    return (1.0 - w) * k[i] + w * k[i + 1]


def floor_penetration(model: RobotModel, q, h: float = 0.05) -> float:
    """How far the FFO sits below the clearance height h (0 if above)."""
    if h < 0:
        raise ValueError("clearance height must be non-negative")
    z = fk_matrices(model, np.asarray(q, dtype=float))[..., 2, 3]
    return np.maximum(0.0, h - z)
