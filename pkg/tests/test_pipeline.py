import json
import logging
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from pasgrip.cli import configure_logging, main
from pasgrip.config import ConfigError, PipelineConfig
from pasgrip.fixtures import DESK, fixtures, floor_sphere, write_fixture_config
from pasgrip.geometry import RigidTransform, load_mesh
from pasgrip.geometry.mesh import save_obj
from pasgrip.kinematics import default_robot, fk_matrices
from pasgrip.pipeline import EXIT_ERROR, EXIT_NO_GC, EXIT_OK, stage_seed
from pasgrip.trajopt import auto_forward_keyframe

JSON_ARTIFACTS = ["gcs.json", "trajopt.json", "topopt.json", "trajectory.json"]
ARTIFACTS = JSON_ARTIFACTS + ["gripper.obj", "density.vox", "compliance_history.csv", "skeleton.obj",
                              "trajectory.csv", "manifest.json"]


def read(path):
    return path.read_bytes()


@pytest.fixture(scope="module")
def fused(tmp_path_factory):
    root = tmp_path_factory.mktemp("fused")
    cfg = write_fixture_config(fixtures()["notched_box"], root, **DESK)
    code = main(["pipeline", "-c", str(cfg)])
    return cfg, root / "out", code


# -- config

def test_config_roundtrip(tmp_path):
    cfg = write_fixture_config(fixtures()["notched_box"], tmp_path, **DESK)
    c = PipelineConfig.load(cfg)
    assert c.trajopt.population == 2000 and c.topopt.voxel_size == 0.005
    c.save(tmp_path / "again.json")
    d = PipelineConfig.load(tmp_path / "again.json")
    assert c.to_dict() == d.to_dict()
    np.testing.assert_allclose(d.object_pose.translation, [0.535, 0, 0])


def test_config_relative_paths(tmp_path):
    save_obj(fixtures()["notched_box"].mesh, tmp_path / "m.obj")
    (tmp_path / "c.json").write_text(json.dumps({"object_mesh_path": "m.obj"}))
    c = PipelineConfig.load(tmp_path / "c.json").validate()
    assert c.mesh_path == tmp_path / "m.obj" and c.out_path == tmp_path / "out"
    assert c.robot_path is None and c.grasp_keyframe == "auto-forward"


@pytest.mark.parametrize("patch, msg", [
    ({"unknown": 1}, "unknown config keys"),
    ({"trajopt": {"popsize": 3}}, "unknown TrajoptParams keys"),
    ({"mesh_scale": 0}, "mesh_scale"),
    ({"grasp_keyframe": "sideways"}, "grasp_keyframe"),
    ({"topopt": {"volume_fraction": 1.5}}, "volume_fraction"),
    ({"object_mesh_path": "missing.obj"}, "not found"),
    ({"top_k": 0}, "top_k"),
])
def test_config_rejects_bad_values(tmp_path, patch, msg):
    save_obj(fixtures()["notched_box"].mesh, tmp_path / "m.obj")
    d = {"object_mesh_path": "m.obj", **patch}
    with pytest.raises(ConfigError, match=msg):
        PipelineConfig.from_dict(d, base_dir=tmp_path).validate()


def test_stage_seeds_independent():
    s = {(seed, st) for seed in range(5) for st in ("gcgen", "trajopt", "topopt")}
    assert len({stage_seed(a, b) for a, b in s}) == 15
    assert stage_seed(3, "trajopt") == stage_seed(3, "trajopt")


# -- end to end on the notched box

def test_pipeline_writes_all_artifacts(fused):
    _, out, code = fused
    assert code == EXIT_OK
    for name in ARTIFACTS:
        assert (out / name).is_file(), name
    summary = json.loads((out / "trajopt.json").read_text())
    assert summary["best"] in summary["verified"]
    assert (out / f"solutions/solution_{summary['best']:04d}.json").is_file()
    assert load_mesh(out / "gripper.obj").is_watertight()


def test_gcgen_lists_every_generated_gc(fused):
    _, out, _ = fused
    d = json.loads((out / "gcs.json").read_text())
    assert len(d["gcs"]) == 3000
    assert [g["index"] for g in d["gcs"]] == list(range(3000))
    ranked = [d["gcs"][i] for i in d["ranked"]]
    assert all(g["stable"] and g["reachable"] for g in ranked)
    assert [g["pareto_rank"] for g in ranked] == sorted(g["pareto_rank"] for g in ranked)


def test_trajectory_csv_matches_json(fused):
    _, out, _ = fused
    tj = json.loads((out / "trajectory.json").read_text())
    rows = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows[:, 0], tj["times"])
    np.testing.assert_array_equal(rows[:, 1:], tj["keyframes_rad"])


def test_resume_reruns_only_damaged_stage(fused, caplog, tmp_path):
    cfg, out, _ = fused
    before = {n: read(out / n) for n in ARTIFACTS if n != "manifest.json"}
    (out / "gripper.obj").unlink()
    with caplog.at_level(logging.INFO, logger="pasgrip"):
        assert main(["pipeline", "-c", str(cfg)]) == EXIT_OK
    skipped = [r.getMessage() for r in caplog.records if "status=skipped" in r.getMessage()]
    assert any("stage=gcgen" in m for m in skipped) and any("stage=trajopt" in m for m in skipped)
    assert not any("stage=topopt" in m for m in skipped)
    for n, b in before.items():
        assert read(out / n) == b, n


def test_staged_run_matches_fused(fused, tmp_path):
    _, fused_out, _ = fused
    cfg = write_fixture_config(fixtures()["notched_box"], tmp_path, **DESK)
    for stage in ("gcgen", "trajopt", "topopt"):
        assert main([stage, "-c", str(cfg), "--threads", "1"]) == EXIT_OK
    out = tmp_path / "out"
    for n in JSON_ARTIFACTS + ["gripper.obj", "density.vox", "compliance_history.csv"]:
        assert read(out / n) == read(fused_out / n), n
    best = json.loads((out / "trajopt.json").read_text())["best"]
    sol = f"solutions/solution_{best:04d}.json"
    assert read(out / sol) == read(fused_out / sol)


def test_trajopt_with_handwritten_gc_file(fused, tmp_path):
    _, fused_out, _ = fused
    best_gc = json.loads((fused_out / "trajopt.json").read_text())["best_gc"]
    gc_file = tmp_path / "mine.json"
    gc_file.write_text(json.dumps({"gcs": [{"contacts": best_gc["contacts"]}]}))
    cfg = write_fixture_config(fixtures()["notched_box"], tmp_path, **DESK)
    assert main(["trajopt", "-c", str(cfg), "--gc-file", str(gc_file)]) == EXIT_OK
    summary = json.loads((tmp_path / "out" / "trajopt.json").read_text())
    assert summary["attempted"] == [0] and summary["verified"] == [0]


def test_missing_prerequisite(tmp_path, caplog):
    cfg = write_fixture_config(fixtures()["notched_box"], tmp_path, **DESK)
    with caplog.at_level(logging.ERROR, logger="pasgrip"):
        assert main(["topopt", "-c", str(cfg)]) == EXIT_ERROR
        assert main(["trajopt", "-c", str(cfg)]) == EXIT_ERROR
    assert sum("missing prerequisite" in r.getMessage() for r in caplog.records) == 2


def test_ffo_below_floor_exits_no_gc(tmp_path):
    robot = default_robot()
    q = auto_forward_keyframe(robot, -0.05)
    assert fk_matrices(robot, q)[2, 3] < 0
    sphere = floor_sphere(0.05).transformed(RigidTransform.from_translation((0.6, 0, 0)))
    save_obj(sphere, tmp_path / "sphere.obj")
    (tmp_path / "c.json").write_text(json.dumps({"object_mesh_path": "sphere.obj",
                                                 "grasp_keyframe": [float(v) for v in q]}))
    assert main(["gcgen", "-c", str(tmp_path / "c.json")]) == EXIT_NO_GC
    assert json.loads((tmp_path / "out" / "gcs.json").read_text())["gcs"] == []


def test_bad_config_exits_error(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    assert main(["pipeline", "-c", str(tmp_path / "c.json")]) == EXIT_ERROR


# -- logging

@pytest.mark.parametrize("value, level", [("error", logging.ERROR), ("debug", logging.DEBUG),
                                          ("INFO", logging.INFO), ("loud", logging.INFO)])
def test_log_level_from_env(monkeypatch, value, level):
    monkeypatch.setenv("PASGRIP_LOG", value)
    configure_logging()
    assert logging.getLogger("pasgrip").level == level


def test_cli_subprocess_quiet_at_error_level(tmp_path):
    cfg = write_fixture_config(fixtures()["notched_box"], tmp_path, **DESK)
    env = {**os.environ, "PASGRIP_LOG": "error"}
    p = subprocess.run([sys.executable, "-m", "pasgrip.cli", "topopt", "-c", str(cfg)], env=env,
                       capture_output=True, text=True, timeout=300)
    assert p.returncode == EXIT_ERROR
    lines = [ln for ln in p.stderr.splitlines() if ln.strip()]
    assert lines and all(" ERROR " in ln for ln in lines)


def test_console_script_installed():
    exe = shutil.which("pasgrip")
    assert exe is not None
    p = subprocess.run([exe, "--help"], capture_output=True, text=True, timeout=120)
    assert p.returncode == 0 and "gcgen" in p.stdout
