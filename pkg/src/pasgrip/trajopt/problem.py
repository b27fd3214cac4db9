"""Skeleton + insert-trajectory design problem and its collision energies.

The skeleton is stored in world coordinates at the grasp keyframe. At time
t it is carried rigidly by the flange: a grasp-frame point p sits at
F(t) F(1)^-1 p, where F is forward kinematics of the interpolated joints.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..geometry.queries import winding_numbers
from ..kinematics import RobotModel, Trajectory, fk_matrices, interpolate
from .pathcost import PathCoster

CONTACT_PROBE = 1e-4
MAX_REFINE_ROUNDS = 40


@dataclass
class TrajoptParams:
    m: int = 4  # joints per finger, FFO and contact included
    n: int = 4  # keyframes, retreat and grasp included
    d_sub: float = 0.001
    d_lin: float = 0.001
    lambda_floor: float = 1000.0
    lambda_reg: float = 1e-6
    floor_clearance: float = 0.05
    skeleton_bound: float = 0.01
    joint_bounds_deg: tuple = (5.0, 5.0, 5.0, 45.0, 25.0, 90.0)
    population: int = 10000
    rel_tol: float = 1e-6
    budget: int = 300000
    retreat_dist: float | None = None  # None: max(0.3, 2 x bounding-sphere diameter)
    dense_factor: int = 4
    use_trajectory_energy: bool = True
    use_wraparound: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["joint_bounds_deg"] = list(self.joint_bounds_deg)
        return d


@dataclass
class EnergyBreakdown:
    E_g: float
    E_t: float
    E_r: float
    L: float
    total: float

    @property
    def collision(self) -> float:
        """Part of the objective that must vanish for a valid solution."""
        return self.E_g + self.E_t + self.E_r

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def resample_polyline(pts, spacing: float) -> np.ndarray:
    """Keep every vertex and subdivide each segment into pieces <= spacing."""
    pts = np.asarray(pts, dtype=float)
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        s = np.arange(1, k + 1)[:, None] / k
        out.append(a + s * (b - a))
    return np.concatenate(out)


def _rotation_angles(Ra, Rb):
    c = (np.einsum("tij,tij->t", Ra, Rb) - 1.0) * 0.5
    return np.arccos(np.clip(c, -1.0, 1.0))


def _bisect(t, mask):
    mids = 0.5 * (t[:-1] + t[1:])[mask]
    return np.sort(np.concatenate([t, mids]))


@dataclass
class TrajoptProblem:
    robot: RobotModel
    skeleton0: np.ndarray  # (3, m, 3) world frame at grasp
    normals: np.ndarray  # (3, 3) outward contact normals
    keyframes0: np.ndarray  # (n, d)
    coster: PathCoster
    params: TrajoptParams = field(default_factory=TrajoptParams)

    def __post_init__(self):
        self.skeleton0 = np.asarray(self.skeleton0, dtype=float)
        self.keyframes0 = np.asarray(self.keyframes0, dtype=float)
        self.normals = np.asarray(self.normals, dtype=float)
        p = self.params
        if self.skeleton0.shape != (3, p.m, 3):
            raise ValueError(f"skeleton must have shape (3, {p.m}, 3)")
        if self.keyframes0.shape != (p.n, self.robot.dof):
            raise ValueError(f"keyframes must have shape ({p.n}, {self.robot.dof})")
        self.n_skel = 3 * (p.m - 2) * 3
        self.n_traj = self.robot.dof * (p.n - 2)
        jb = np.radians(np.asarray(p.joint_bounds_deg, dtype=float))
        self.sigma = np.concatenate([np.full(self.n_skel, p.skeleton_bound), np.tile(jb, p.n - 2)])
        self.F1_inv = np.linalg.inv(fk_matrices(self.robot, self.keyframes0[-1]))

    @property
    def dim(self) -> int:
        return self.n_skel + self.n_traj

    # -- design variables
    def decode(self, x):
        x = np.asarray(x, dtype=float)
        m, n = self.params.m, self.params.n
        skel = self.skeleton0.copy()
        skel[:, 1:m - 1] += x[:self.n_skel].reshape(3, m - 2, 3)
        kf = self.keyframes0.copy()
        kf[1:n - 1] += x[self.n_skel:].reshape(n - 2, self.robot.dof)
        return skel, kf

    def probe_skeleton(self, skel):
        """Skeleton used for collision tests: tips lifted off the surface."""
        s = np.array(skel, dtype=float)
        s[:, -1] += CONTACT_PROBE * self.normals
        return s

    # -- motion
    def motions(self, keyframes, t) -> np.ndarray:
        """F(t) F(1)^-1 for each time in t, (T, 4, 4)."""
        F = fk_matrices(self.robot, interpolate(Trajectory(keyframes), t))
        return F @ self.F1_inv

    def skeleton_at(self, skel, keyframes, t) -> np.ndarray:
        M = self.motions(keyframes, np.atleast_1d(t))
        pts = skel.reshape(-1, 3)
        out = np.einsum("tij,kj->tki", M[:, :3, :3], pts) + M[:, None, :3, 3]
        return out.reshape((len(M),) + skel.shape)

    def displacement_grid(self, keyframes, radius: float, d_sub: float):
        """Times such that no skeleton point moves more than d_sub between samples.

        The per-interval bound is |FFO step| + rotation angle x radius.
        """
        t = np.linspace(0.0, 1.0, self.params.n)
        for _ in range(MAX_REFINE_ROUNDS):
            F = fk_matrices(self.robot, interpolate(Trajectory(keyframes), t))
            step = np.linalg.norm(np.diff(F[:, :3, 3], axis=0), axis=1)
            step += _rotation_angles(F[:-1, :3, :3], F[1:, :3, :3]) * radius
            bad = step > d_sub
            if not bad.any():
                return t, F
            t = _bisect(t, bad)
        return t, fk_matrices(self.robot, interpolate(Trajectory(keyframes), t))

    def linearized_grid(self, keyframes, points, d_lin: float):
        """Shared times at which every point's trace is piecewise-linear within d_lin."""
        t = np.linspace(0.0, 1.0, self.params.n)
        for _ in range(MAX_REFINE_ROUNDS):
            mids = 0.5 * (t[:-1] + t[1:])
            M = self.motions(keyframes, np.concatenate([t, mids]))
            T = len(t)
            P = np.einsum("tij,kj->tki", M[:, :3, :3], points) + M[:, None, :3, 3]
            chord_mid = 0.5 * (P[:T - 1] + P[1:T])
            dev = np.linalg.norm(P[T:] - chord_mid, axis=2).max(axis=1)
            bad = dev > d_lin
            if not bad.any():
                return t, P[:T]
            t = _bisect(t, bad)
        M = self.motions(keyframes, t)
        return t, np.einsum("tij,kj->tki", M[:, :3, :3], points) + M[:, None, :3, 3]

    # -- energies
    def collision_energies(self, skel, keyframes, d_sub: float, d_lin: float):
        """(E_g, E_t, E_r) for an explicit skeleton and keyframe set."""
        p = self.params
        probe = self.probe_skeleton(skel)
        ffo = probe[0, 0]
        radius = float(np.linalg.norm(probe.reshape(-1, 3) - ffo, axis=1).max())
        t, F = self.displacement_grid(keyframes, radius, d_sub)
        M = F @ self.F1_inv
        pts = probe.reshape(-1, 3)
        posed = np.einsum("tij,kj->tki", M[:, :3, :3], pts) + M[:, None, :3, 3]
        T, m = len(t), p.m
        flat = np.ascontiguousarray(posed.reshape(-1, 3))
        offsets = np.arange(0, T * 3 * m + 1, m, dtype=np.int64)
        ins, wrap = self.coster.evaluate_packed(flat, offsets, p.use_wraparound)
        E_g = float((ins + wrap).reshape(T, 3).sum(axis=1).max())
        E_r = float(np.maximum(0.0, p.floor_clearance - F[:, 2, 3]).max())
        E_t = 0.0
        if p.use_trajectory_energy:
            samples = np.concatenate([resample_polyline(f, d_sub) for f in probe])
            _, traces = self.linearized_grid(keyframes, samples, d_lin)
            tr = np.ascontiguousarray(traces.transpose(1, 0, 2).reshape(-1, 3))
            Tl = traces.shape[0]
            off = np.arange(0, len(samples) * Tl + 1, Tl, dtype=np.int64)
            ins, wrap = self.coster.evaluate_packed(tr, off, p.use_wraparound)
            E_t = float((ins + wrap).max())
        return E_g, E_t, E_r

    def energies(self, x) -> EnergyBreakdown:
        p = self.params
        skel, kf = self.decode(x)
        E_g, E_t, E_r = self.collision_energies(skel, kf, p.d_sub, p.d_lin)
        L = float(np.linalg.norm(np.asarray(x, dtype=float)[self.n_skel:]))
        total = E_g + E_t + p.lambda_floor * E_r + p.lambda_reg * L
        return EnergyBreakdown(E_g, E_t, E_r, L, total)

    def __call__(self, x) -> float:
        return self.energies(x).total

    # -- acceptance
    def verify(self, x, dense_factor: int | None = None) -> bool:
        skel, kf = self.decode(x)
        return verify_collision_free(self, skel, kf, dense_factor or self.params.dense_factor)


def verify_collision_free(problem: TrajoptProblem, skel, keyframes, dense_factor: int = 4) -> bool:
    """Dense re-check of a candidate solution.

    Both energies are recomputed at ``dense_factor`` times finer sampling and
    must be exactly zero. Independently, points spaced d_sub / dense_factor
    along the skeleton are tested for containment with generalized winding
    numbers at every dense time sample, and the FFO must respect the floor
    clearance throughout.
    """
    p = problem.params
    d_sub = p.d_sub / dense_factor
    d_lin = p.d_lin / dense_factor
    E_g, E_t, E_r = problem.collision_energies(skel, keyframes, d_sub, d_lin)
    if E_g != 0.0 or E_t != 0.0 or E_r != 0.0:
        return False
    probe = problem.probe_skeleton(skel)
    ffo = probe[0, 0]
    radius = float(np.linalg.norm(probe.reshape(-1, 3) - ffo, axis=1).max())
    t, F = problem.displacement_grid(keyframes, radius, d_sub)
    if np.any(F[:, 2, 3] < p.floor_clearance):
        return False
    samples = np.concatenate([resample_polyline(f, d_sub) for f in probe])
    M = F @ problem.F1_inv
    pts = (np.einsum("tij,kj->tki", M[:, :3, :3], samples) + M[:, None, :3, 3]).reshape(-1, 3)
    lo, hi = problem.coster.mesh.bounds
    near = np.all((pts >= lo - 1e-9) & (pts <= hi + 1e-9), axis=1)
    if near.any():
        w = winding_numbers(problem.coster.mesh, pts[near])
        if np.any(w > 0.5):
            return False
    return True
