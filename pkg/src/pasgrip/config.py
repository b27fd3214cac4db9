"""Pipeline configuration: one JSON file drives all three stages."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .geometry.transform import RigidTransform
from .grasp.synthesis import GraspParams
from .topopt.stage import TopoptParams
from .trajopt.problem import TrajoptParams

AUTO_FORWARD = "auto-forward"


class ConfigError(ValueError):
    pass


def _params_from(cls, d: dict | None):
    d = dict(d or {})
    known = {f.name for f in fields(cls)}
    extra = sorted(set(d) - known)
    if extra:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(extra)}")
    if "joint_bounds_deg" in d:
        d["joint_bounds_deg"] = tuple(float(v) for v in d["joint_bounds_deg"])
    return cls(**d)


def _params_dict(p) -> dict:
    d = asdict(p)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return d


@dataclass
class PipelineConfig:
    """Inputs and stage parameters of a pipeline run.

    Relative paths are resolved against ``base_dir`` (the directory of the
    config file when loaded with :meth:`load`). ``robot_config_path = None``
    selects the packaged UR5 description.
    """

    object_mesh_path: str
    object_pose: RigidTransform = field(default_factory=RigidTransform)
    mesh_scale: float = 1.0
    robot_config_path: str | None = None
    grasp_keyframe: str | list = AUTO_FORWARD
    seed: int = 0
    output_dir: str = "out"
    top_k: int = 1
    max_gc_attempts: int | None = None
    grasp: GraspParams = field(default_factory=GraspParams)
    trajopt: TrajoptParams = field(default_factory=TrajoptParams)
    topopt: TopoptParams = field(default_factory=TopoptParams)
    base_dir: str = "."

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def mesh_path(self) -> Path:
        return self.resolve(self.object_mesh_path)

    @property
    def robot_path(self) -> Path | None:
        return None if self.robot_config_path is None else self.resolve(self.robot_config_path)

    @property
    def out_path(self) -> Path:
        return self.resolve(self.output_dir)

    def validate(self) -> "PipelineConfig":
        if not self.mesh_path.is_file():
            raise ConfigError(f"object mesh not found: {self.mesh_path}")
        if self.robot_path is not None and not self.robot_path.is_file():
            raise ConfigError(f"robot config not found: {self.robot_path}")
        if not self.mesh_scale > 0:
            raise ConfigError("mesh_scale must be positive")
        if isinstance(self.grasp_keyframe, str):
            if self.grasp_keyframe != AUTO_FORWARD:
                raise ConfigError(f"grasp_keyframe must be a joint vector or {AUTO_FORWARD!r}")
        elif not np.all(np.isfinite(np.asarray(self.grasp_keyframe, dtype=float))):
            raise ConfigError("grasp_keyframe must be finite")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.max_gc_attempts is not None and self.max_gc_attempts < 1:
            raise ConfigError("max_gc_attempts must be >= 1")
        g, t, o = self.grasp, self.trajopt, self.topopt
        checks = [
            (g.n_candidates >= 3, "grasp.n_candidates must be >= 3"),
            (g.n_gcs >= 1, "grasp.n_gcs must be >= 1"),
            (g.mu >= 0, "grasp.mu must be >= 0"),
            (g.cone_sides >= 3, "grasp.cone_sides must be >= 3"),
            (g.force_budget > 0, "grasp.force_budget must be positive"),
            (0 < g.theta_max < np.pi / 2, "grasp.theta_max must lie in (0, pi/2) rad"),
            (g.grid_res > 0, "grasp.grid_res must be positive"),
            (t.m >= 2 and t.n >= 2, "trajopt.m and trajopt.n must be >= 2"),
            (t.d_sub > 0 and t.d_lin > 0, "trajopt.d_sub and trajopt.d_lin must be positive"),
            (t.population >= 2, "trajopt.population must be >= 2"),
            (t.budget >= 1, "trajopt.budget must be >= 1"),
            (t.skeleton_bound >= 0, "trajopt.skeleton_bound must be >= 0"),
            (len(t.joint_bounds_deg) > 0 and min(t.joint_bounds_deg) >= 0,
             "trajopt.joint_bounds_deg must be non-negative"),
            (t.retreat_dist is None or t.retreat_dist >= 0, "trajopt.retreat_dist must be >= 0"),
            (t.dense_factor >= 1, "trajopt.dense_factor must be >= 1"),
            (o.voxel_size > 0, "topopt.voxel_size must be positive"),
            (0 < o.volume_fraction <= 1, "topopt.volume_fraction must lie in (0, 1]"),
            (o.penal >= 1, "topopt.penal must be >= 1"),
            (o.iters >= 1, "topopt.iters must be >= 1"),
            (o.sphere_cells > 0, "topopt.sphere_cells must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def to_dict(self) -> dict:
        kf = self.grasp_keyframe
        return {
            "object_mesh_path": self.object_mesh_path,
            "object_pose": self.object_pose.to_dict(),
            "mesh_scale": float(self.mesh_scale),
            "robot_config_path": self.robot_config_path,
            "grasp_keyframe": kf if isinstance(kf, str) else [float(v) for v in kf],
            "seed": int(self.seed),
            "output_dir": self.output_dir,
            "top_k": int(self.top_k),
            "max_gc_attempts": self.max_gc_attempts,
            "grasp": _params_dict(self.grasp),
            "trajopt": _params_dict(self.trajopt),
            "topopt": _params_dict(self.topopt),
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "PipelineConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)} - {"base_dir"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        if "object_mesh_path" not in d:
            raise ConfigError("object_mesh_path is required")
        kf = d.get("grasp_keyframe", AUTO_FORWARD)
        return cls(
            object_mesh_path=str(d["object_mesh_path"]),
            object_pose=RigidTransform.from_dict(d.get("object_pose", {})),
            mesh_scale=float(d.get("mesh_scale", 1.0)),
            robot_config_path=d.get("robot_config_path"),
            grasp_keyframe=kf if isinstance(kf, str) else [float(v) for v in kf],
            seed=int(d.get("seed", 0)),
            output_dir=str(d.get("output_dir", "out")),
            top_k=int(d.get("top_k", 1)),
            max_gc_attempts=d.get("max_gc_attempts"),
            grasp=_params_from(GraspParams, d.get("grasp")),
            trajopt=_params_from(TrajoptParams, d.get("trajopt")),
            topopt=_params_from(TopoptParams, d.get("topopt")),
            base_dir=str(base_dir),
        )

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(d, base_dir=path.parent)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
