import os

import hypothesis
import numpy as np
import pytest

from pasgrip.geometry.primitives import box, icosphere

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=300, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def unit_cube():
    return box((1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def unit_sphere():
    """Sphere of diameter 1 centered at the origin."""
    return icosphere(3, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def notched_scene():
    """Notched box in front of the default robot with a few ranked GCs and a verified solution."""
    from types import SimpleNamespace

    from pasgrip.fixtures import fixtures
    from pasgrip.geometry import RigidTransform
    from pasgrip.grasp import GraspParams, synthesize_grasps
    from pasgrip.kinematics import default_robot, fk_matrices
    from pasgrip.pipeline import stage_seed
    from pasgrip.trajopt import (InitError, PathCoster, TrajoptParams, auto_forward_keyframe, build_problem,
                                 optimize_gc)

    fx = fixtures()["notched_box"]
    mesh = fx.mesh.transformed(RigidTransform.from_translation(fx.translation))
    robot = default_robot()
    params = TrajoptParams(d_sub=0.002, d_lin=0.002, population=2000, budget=20000)
    grasp_q = auto_forward_keyframe(robot, max(mesh.center_of_mass[2], params.floor_clearance + 0.02))
    ffo = fk_matrices(robot, grasp_q)[:3, 3]
    synth = synthesize_grasps(mesh, ffo, GraspParams(), seed=stage_seed(0, "gcgen"))
    coster = PathCoster.for_object(mesh)
    problem = solution = gc = None
    for g in synth.ranked[:10]:
        try:
            pr = build_problem(g, robot, grasp_q, synth.free_space, coster, params, fx.retreat_dist)
        except InitError:
            continue
        sol = optimize_gc(pr, g.index, seed=0)
        if sol.verified:
            problem, solution, gc = pr, sol, g
            break
    return SimpleNamespace(mesh=mesh, robot=robot, grasp_q=grasp_q, ffo=ffo, synth=synth, coster=coster,
                           params=params, problem=problem, solution=solution, gc=gc)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
