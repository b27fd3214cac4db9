"""Time the main cost centres on one fixture: geodesic table, GC synthesis,
one trajectory-energy evaluation, and one SIMP iteration at desk resolution.

    python scripts/bench_costs.py [fixture]
"""

import sys
import time

import numpy as np

from pasgrip.fixtures import fixtures
from pasgrip.geometry import RigidTransform
from pasgrip.grasp import GraspParams, synthesize_grasps
from pasgrip.kinematics import default_robot, fk_matrices
from pasgrip.topopt import simp_optimize
from pasgrip.trajopt import InitError, PathCoster, TrajoptParams, auto_forward_keyframe, build_problem


def timed(label, fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    print(f"{label:<28s}{time.perf_counter() - t0:8.3f} s")
    return out


def main(name="notched_box"):
    fx = fixtures()[name]
    mesh = fx.mesh.transformed(RigidTransform.from_translation(fx.translation))
    robot = default_robot()
    params = TrajoptParams(d_sub=0.002, d_lin=0.002)
    q = auto_forward_keyframe(robot, max(mesh.center_of_mass[2], params.floor_clearance + 0.02))
    ffo = fk_matrices(robot, q)[:3, 3]

    coster = timed("geodesic table", PathCoster.for_object, mesh)
    synth = timed("GC synthesis (1000/3000)", synthesize_grasps, mesh, ffo, GraspParams(), 0)
    print(f"  ranked GCs: {len(synth.ranked)}")
    for gc in synth.ranked:
        try:
            pr = build_problem(gc, robot, q, synth.free_space, coster, params, fx.retreat_dist)
            break
        except InitError:
            continue
    else:
        print("no GC could be initialized")
        return
    x = np.zeros(pr.dim)
    pr(x)  # compile
    t0 = time.perf_counter()
    reps = 20
    for i in range(reps):
        pr(np.random.default_rng(i).uniform(-pr.sigma, pr.sigma))
    print(f"{'trajectory energy (mean)':<28s}{(time.perf_counter() - t0) / reps:8.3f} s")

    mask = np.ones((40, 20, 20), bool)
    fixed = np.argwhere(mask[:1])
    timed("SIMP 1 iter, 16k cells", simp_optimize, mask, fixed, [[39, 10, 0]], [[0, 0, -1.0]], 0.1, iters=1)


if __name__ == "__main__":
    main(*sys.argv[1:])
