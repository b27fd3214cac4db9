"""Stage orchestration: gcgen -> trajopt -> topopt with a hash manifest for resume.

Every stage writes its artifacts under the output directory and records a
hash of its inputs (config section, input files, upstream artifacts) plus
the hashes of what it wrote. A stage whose recorded input hash matches and
whose outputs are intact is skipped by :func:`run_pipeline`.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import shutil
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .config import AUTO_FORWARD, ConfigError, PipelineConfig
from .geometry.mesh import TriMesh, load_mesh, save_obj, save_polylines_obj
from .grasp.candidates import CandidateError
from .grasp.contacts import GraspConfiguration
from .grasp.freespace import FreeSpace
from .grasp.synthesis import synthesize_grasps
from .kinematics import IKError, RobotModel, default_robot, fk_matrices
from .topopt.stage import run_topopt
from .topopt.volume import TopoptError
from .trajopt.init import auto_forward_keyframe, default_retreat
from .trajopt.pathcost import PathCoster
from .trajopt.solve import Solution, solve_ranked

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_GC = 2
EXIT_NO_TRAJECTORY = 3
EXIT_TOPOPT = 4

STAGES = ("gcgen", "trajopt", "topopt")
MANIFEST = "manifest.json"
GCS_FILE = "gcs.json"
TRAJOPT_FILE = "trajopt.json"
SOLUTION_DIR = "solutions"
TOPOPT_FILE = "topopt.json"
# keeps the auto-forward FFO above the floor-clearance band used by the trajectory energy
AUTO_FORWARD_HEIGHT_MARGIN = 0.02


class PipelineError(RuntimeError):
    exit_code = EXIT_ERROR

    def __init__(self, msg: str, exit_code: int | None = None):
        super().__init__(msg)
        if exit_code is not None:
            self.exit_code = exit_code


class MissingArtifact(PipelineError):
    def __init__(self, path):
        super().__init__(f"missing prerequisite artifact: {path}")
        self.path = path


# -- serialization helpers

def dumps(obj) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> None:
    Path(path).write_text(dumps(obj))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def stage_seed(seed: int, stage: str) -> int:
    """Independent seed per stage derived from the run seed."""
    ss = np.random.SeedSequence([int(seed), STAGES.index(stage)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


class Manifest:
    def __init__(self, out: Path):
        self.path = Path(out) / MANIFEST
        self.data = {"stages": {}}
        if self.path.is_file():
            try:
                self.data = json.loads(self.path.read_text())
            except json.JSONDecodeError:
                log.warning("stage=manifest unreadable=%s; starting fresh", self.path)

    def complete(self, stage: str, inputs: str) -> bool:
        rec = self.data["stages"].get(stage)
        if rec is None or rec.get("inputs") != inputs:
            return False
        root = self.path.parent
        return all((root / f).is_file() and sha256_file(root / f) == h for f, h in rec["outputs"].items())

    def record(self, stage: str, inputs: str, outputs: list) -> None:
        root = self.path.parent
        self.data["stages"][stage] = {"inputs": inputs,
                                      "outputs": {str(f): sha256_file(root / f) for f in sorted(map(str, outputs))}}
        self.path.write_text(dumps(self.data))

    def forget(self, stage: str) -> None:
        if self.data["stages"].pop(stage, None) is not None:
            self.path.write_text(dumps(self.data))


# -- shared inputs

@dataclass
class RunContext:
    config: PipelineConfig
    seed: int

    @cached_property
    def out(self) -> Path:
        p = self.config.out_path
        p.mkdir(parents=True, exist_ok=True)
        return p

    @cached_property
    def mesh(self) -> TriMesh:
        c = self.config
        return load_mesh(c.mesh_path, c.mesh_scale).transformed(c.object_pose)

    @cached_property
    def robot(self) -> RobotModel:
        p = self.config.robot_path
        return default_robot() if p is None else RobotModel.load(p)

    @cached_property
    def grasp_q(self) -> np.ndarray:
        kf = self.config.grasp_keyframe
        if isinstance(kf, str) and kf == AUTO_FORWARD:
            height = max(float(self.mesh.center_of_mass[2]),
                         self.config.trajopt.floor_clearance + AUTO_FORWARD_HEIGHT_MARGIN)
            try:
                return auto_forward_keyframe(self.robot, height)
            except IKError as e:
                raise PipelineError(f"auto-forward grasp keyframe has no IK solution: {e}") from e
        q = np.asarray(kf, dtype=float)
        if q.shape != (self.robot.dof,):
            raise ConfigError(f"grasp_keyframe needs {self.robot.dof} joint values")
        return q

    @cached_property
    def ffo(self) -> np.ndarray:
        return fk_matrices(self.robot, self.grasp_q)[:3, 3]

    @cached_property
    def retreat_dist(self) -> float:
        r = self.config.trajopt.retreat_dist
        return default_retreat(self.mesh) if r is None else float(r)

    def base_inputs(self) -> dict:
        c = self.config
        return {
            "mesh": sha256_file(c.mesh_path),
            "mesh_scale": c.mesh_scale,
            "object_pose": c.object_pose.to_dict(),
            "robot": None if c.robot_path is None else sha256_file(c.robot_path),
            "grasp_keyframe": c.to_dict()["grasp_keyframe"],
            "seed": self.seed,
        }


# -- stages

def _gcgen_inputs(ctx: RunContext) -> str:
    return sha256_obj({**ctx.base_inputs(), "grasp": ctx.config.to_dict()["grasp"]})


def run_gcgen(ctx: RunContext) -> list:
    """Sample, filter and rank GCs; writes gcs.json. Returns the output file list."""
    p = ctx.config.grasp
    seed = stage_seed(ctx.seed, "gcgen")
    doc = {"ffo": [float(v) for v in ctx.ffo], "grasp_keyframe_rad": [float(v) for v in ctx.grasp_q],
           "gcs": [], "ranked": []}
    try:
        res = synthesize_grasps(ctx.mesh, ctx.ffo, p, seed=seed)
    except CandidateError as e:
        write_json(ctx.out / GCS_FILE, doc)
        raise PipelineError(f"no candidate contact points: {e}", EXIT_NO_GC) from e
    doc["gcs"] = [g.to_dict() for g in res.gcs]
    doc["ranked"] = [int(g.index) for g in res.ranked]
    write_json(ctx.out / GCS_FILE, doc)
    if not res.ranked:
        raise PipelineError("no stable and reachable grasp configuration", EXIT_NO_GC)
    return [GCS_FILE]


def load_gc_file(path, mu: float) -> list:
    """GCs to attempt, in order.

    A file with a ``ranked`` list (as written by gcgen) yields those GCs in
    rank order. A hand-written file without it yields every listed GC in file
    order, unfiltered.
    """
    d = json.loads(Path(path).read_text())
    entries = d["gcs"] if isinstance(d, dict) else d
    gcs = []
    for i, e in enumerate(entries):
        g = GraspConfiguration.from_dict(e, mu)
        if len(g.contacts) != 3:
            raise PipelineError(f"GC {i} in {path} must have exactly 3 contacts")
        if g.index < 0:
            g.index = i
        gcs.append(g)
    if isinstance(d, dict) and "ranked" in d:
        by_index = {g.index: g for g in gcs}
        return [by_index[i] for i in d["ranked"]]
    return gcs


def _trajopt_inputs(ctx: RunContext, gc_path: Path) -> str:
    c = ctx.config
    return sha256_obj({**ctx.base_inputs(), "gcs": sha256_file(gc_path), "grasp_res": c.grasp.grid_res,
                       "trajopt": c.to_dict()["trajopt"], "top_k": c.top_k,
                       "max_gc_attempts": c.max_gc_attempts})


def solution_name(gc_index: int) -> str:
    return f"{SOLUTION_DIR}/solution_{gc_index:04d}.json"


def write_trajectory(out: Path, keyframes) -> list:
    kf = np.asarray(keyframes, dtype=float)
    times = np.linspace(0.0, 1.0, len(kf))
    write_json(out / "trajectory.json", {"times": times.tolist(), "keyframes_rad": kf.tolist()})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"q{j + 1}" for j in range(kf.shape[1])])
    for t, q in zip(times, kf):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in q])
    (out / "trajectory.csv").write_text(buf.getvalue())
    return ["trajectory.json", "trajectory.csv"]


def run_trajopt(ctx: RunContext, gc_path: Path) -> list:
    c = ctx.config
    gcs = load_gc_file(gc_path, c.grasp.mu)
    if not gcs:
        raise PipelineError(f"{gc_path} holds no GC to optimize", EXIT_NO_GC)
    sol_dir = ctx.out / SOLUTION_DIR
    if sol_dir.exists():
        shutil.rmtree(sol_dir)
    sol_dir.mkdir()
    coster = PathCoster.for_object(ctx.mesh)
    free_space = FreeSpace(ctx.mesh, ctx.ffo, c.grasp.grid_res)
    written = []

    def save(sol: Solution):
        name = solution_name(sol.gc_index)
        write_json(ctx.out / name, sol.to_dict())
        hist = "".join(f"{e},{repr(float(b))}\n" for e, b in sol.history)
        (ctx.out / name.replace(".json", "_history.csv")).write_text("evals,best\n" + hist)
        written.extend([name, name.replace(".json", "_history.csv")])

    sols = solve_ranked(gcs, ctx.robot, ctx.grasp_q, free_space, coster, c.trajopt, ctx.retreat_dist,
                        seed=stage_seed(ctx.seed, "trajopt"), top_k=c.top_k,
                        max_attempts=c.max_gc_attempts, on_solution=save)
    verified = [s for s in sols if s.verified]
    by_index = {g.index: g for g in gcs}
    summary = {
        "attempted": [int(s.gc_index) for s in sols],
        "verified": [int(s.gc_index) for s in verified],
        "best": int(verified[0].gc_index) if verified else None,
        "best_gc": by_index[verified[0].gc_index].to_dict() if verified else None,
        "retreat_dist": ctx.retreat_dist,
    }
    write_json(ctx.out / TRAJOPT_FILE, summary)
    written.append(TRAJOPT_FILE)
    if not verified:
        raise PipelineError("no verified trajectory for any attempted GC", EXIT_NO_TRAJECTORY)
    best = verified[0]
    save_polylines_obj(list(best.skeleton), ctx.out / "skeleton.obj")
    written += ["skeleton.obj"] + write_trajectory(ctx.out, best.keyframes)
    return written


def _topopt_inputs(ctx: RunContext) -> str:
    summary = ctx.out / TRAJOPT_FILE
    best = json.loads(summary.read_text())["best"]
    return sha256_obj({**ctx.base_inputs(), "trajopt": sha256_file(summary),
                       "solution": sha256_file(ctx.out / solution_name(best)),
                       "topopt": ctx.config.to_dict()["topopt"]})


def _topopt_prereqs(ctx: RunContext) -> tuple:
    summary = ctx.out / TRAJOPT_FILE
    if not summary.is_file():
        raise MissingArtifact(summary)
    d = json.loads(summary.read_text())
    if d.get("best") is None:
        raise PipelineError(f"{summary} records no verified solution", EXIT_NO_TRAJECTORY)
    sol_path = ctx.out / solution_name(d["best"])
    if not sol_path.is_file():
        raise MissingArtifact(sol_path)
    sol = Solution.from_dict(json.loads(sol_path.read_text()))
    gc = GraspConfiguration.from_dict(d["best_gc"], ctx.config.grasp.mu)
    return sol, gc


def run_topopt_stage(ctx: RunContext) -> list:
    sol, gc = _topopt_prereqs(ctx)
    try:
        res = run_topopt(ctx.mesh, ctx.robot, gc, sol.skeleton, sol.keyframes, ctx.config.topopt)
    except TopoptError as e:
        raise PipelineError(f"topology optimization failed: {e}", EXIT_TOPOPT) from e
    save_obj(res.gripper, ctx.out / "gripper.obj")
    res.density.save(ctx.out / "density.vox")
    rows = "".join(f"{i},{repr(float(c))},{repr(float(v))}\n"
                   for i, (c, v) in enumerate(zip(res.compliance_history, res.volume_history)))
    (ctx.out / "compliance_history.csv").write_text("iteration,compliance,volume_fraction\n" + rows)
    write_json(ctx.out / TOPOPT_FILE, {
        "gc_index": int(sol.gc_index),
        "voxel_size": float(ctx.config.topopt.voxel_size),
        "grid_dims": [int(v) for v in res.density.dims],
        "final_compliance": float(res.compliance_history[-1]),
        "gripper_volume": float(res.gripper.volume),
        "gripper_watertight": bool(res.gripper.is_watertight()),
    })
    return ["gripper.obj", "density.vox", "compliance_history.csv", TOPOPT_FILE]


# -- entry points

def _context(config: PipelineConfig, seed: int | None) -> RunContext:
    config.validate()
    return RunContext(config, config.seed if seed is None else int(seed))


def run_stage(stage: str, config: PipelineConfig, seed: int | None = None, gc_file=None) -> int:
    """Run one stage unconditionally; its prerequisites must already exist."""
    ctx = _context(config, seed)
    man = Manifest(ctx.out)
    man.forget(stage)
    if stage == "gcgen":
        inputs = _gcgen_inputs(ctx)
        outputs = run_gcgen(ctx)
    elif stage == "trajopt":
        gc_path = Path(gc_file) if gc_file else ctx.out / GCS_FILE
        if not gc_path.is_file():
            raise MissingArtifact(gc_path)
        inputs = _trajopt_inputs(ctx, gc_path)
        outputs = run_trajopt(ctx, gc_path)
    elif stage == "topopt":
        _topopt_prereqs(ctx)
        inputs = _topopt_inputs(ctx)
        outputs = run_topopt_stage(ctx)
    else:
        raise ValueError(f"unknown stage {stage!r}")
    man.record(stage, inputs, outputs)
    return EXIT_OK


def run_pipeline(config: PipelineConfig, seed: int | None = None) -> int:
    """All stages in order, skipping those already complete for the same inputs."""
    ctx = _context(config, seed)
    man = Manifest(ctx.out)
    steps = (
        ("gcgen", lambda: _gcgen_inputs(ctx), lambda: run_gcgen(ctx)),
        ("trajopt", lambda: _trajopt_inputs(ctx, ctx.out / GCS_FILE), lambda: run_trajopt(ctx, ctx.out / GCS_FILE)),
        ("topopt", lambda: _topopt_inputs(ctx), lambda: run_topopt_stage(ctx)),
    )
    for name, inputs_fn, run_fn in steps:
        inputs = inputs_fn()
        if man.complete(name, inputs):
            log.info("stage=%s status=skipped reason=inputs_unchanged", name)
            continue
        man.forget(name)
        log.info("stage=%s status=running", name)
        man.record(name, inputs, run_fn())
        log.info("stage=%s status=done", name)
    return EXIT_OK
