"""Co-optimize skeleton and trajectory for ranked GCs until one verifies."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..grasp.contacts import GraspConfiguration
from ..grasp.freespace import FreeSpace
from ..kinematics import IKError, RobotModel
from .crs import crs_optimize
from .init import InitError, init_skeleton, init_trajectory
from .pathcost import PathCoster
from .problem import EnergyBreakdown, TrajoptParams, TrajoptProblem

log = logging.getLogger(__name__)

# any value above this cannot be collision-free: lambda_reg * |x_traj| stays below it
_STOP_SCREEN = 1e-4


@dataclass
class Solution:
    gc_index: int
    x: np.ndarray
    skeleton: np.ndarray  # (3, m, 3)
    keyframes: np.ndarray  # (n, d)
    energies: EnergyBreakdown
    verified: bool
    eval_count: int
    history: list
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "gc_index": int(self.gc_index),
            "x": [float(v) for v in self.x],
            "skeleton": self.skeleton.tolist(),
            "keyframes_rad": self.keyframes.tolist(),
            "energies": self.energies.to_dict(),
            "verified": bool(self.verified),
            "eval_count": int(self.eval_count),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        e = d["energies"]
        return cls(d["gc_index"], np.asarray(d["x"], dtype=float), np.asarray(d["skeleton"], dtype=float),
                   np.asarray(d["keyframes_rad"], dtype=float),
                   EnergyBreakdown(e["E_g"], e["E_t"], e["E_r"], e["L"], e["total"]),
                   bool(d["verified"]), int(d["eval_count"]), [])


def build_problem(gc: GraspConfiguration, robot: RobotModel, grasp_q, free_space: FreeSpace,
                  coster: PathCoster, params: TrajoptParams, retreat_dist: float) -> TrajoptProblem:
    skel = init_skeleton(gc, free_space, coster, params.m)
    traj = init_trajectory(robot, grasp_q, retreat_dist, params.n)
    return TrajoptProblem(robot, skel, gc.normals, traj.keyframes, coster, params)


def optimize_gc(problem: TrajoptProblem, gc_index: int = 0, seed: int = 0) -> Solution:
    p = problem.params
    t0 = time.perf_counter()

    def stop(x, f):
        if f > _STOP_SCREEN:
            return False
        return problem.energies(x).collision == 0.0

    def logged(x):
        return problem(x)

    res = crs_optimize(logged, -problem.sigma, problem.sigma, p.population, p.rel_tol, p.budget,
                       seed=seed, x0=np.zeros(problem.dim), stop=stop)
    e = problem.energies(res.x)
    verified = e.collision == 0.0 and problem.verify(res.x)
    skel, kf = problem.decode(res.x)
    dt = time.perf_counter() - t0
    log.info("stage=trajopt gc=%d evals=%d best=%.6g collision=%.6g verified=%s reason=%s seconds=%.1f",
             gc_index, res.evals, e.total, e.collision, verified, res.reason, dt)
    return Solution(gc_index, res.x, skel, kf, e, verified, res.evals, res.history, dt)


def solve_ranked(ranked: list, robot: RobotModel, grasp_q, free_space: FreeSpace, coster: PathCoster,
                 params: TrajoptParams, retreat_dist: float, seed: int = 0, top_k: int = 1,
                 max_attempts: int | None = None, on_solution=None) -> list:
    """Attempt GCs in rank order; stop after ``top_k`` verified successes.

    Returns every attempted Solution (verified or not). GCs whose skeleton
    cannot be initialized are skipped.
    """
    out, wins = [], 0
    for k, gc in enumerate(ranked):
        if max_attempts is not None and k >= max_attempts:
            break
        try:
            problem = build_problem(gc, robot, grasp_q, free_space, coster, params, retreat_dist)
        except (InitError, IKError) as e:
            log.info("stage=trajopt gc=%d skipped=%s", gc.index, e)
            continue
        sol = optimize_gc(problem, gc.index, seed + gc.index)
        out.append(sol)
        if on_solution is not None:
            on_solution(sol)
        if sol.verified:
            wins += 1
            if wins >= top_k:
                break
    return out
