import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from pasgrip.geometry import point_inside
from pasgrip.kinematics import fk_matrices
from pasgrip.topopt import (TopoptError, TopoptParams, collision_free_volume, compliance, contact_loads,
                            density_filter, hex8_stiffness, run_topopt, simp_optimize)
from pasgrip.topopt import simp as simp_mod
from pasgrip.topopt.simp import CORNERS, NU

# -- element and filter


def linear_field(strain):
    """Nodal displacements u = strain @ x at the unit-cube corners."""
    return (CORNERS @ strain.T).ravel()


def strain_energy_density(strain, nu=NU):
    lam = nu / ((1 + nu) * (1 - 2 * nu))
    mu = 1.0 / (2 * (1 + nu))
    return 0.5 * lam * np.trace(strain) ** 2 + mu * np.sum(strain * strain)


@given(arrays(np.float64, (3, 3), elements=st.floats(-1, 1)))
def test_hex8_patch_test(a):
    eps = 0.5 * (a + a.T)
    u = linear_field(eps)
    # trilinear elements reproduce linear fields exactly: stored energy equals the continuum value
    assert 0.5 * u @ hex8_stiffness() @ u == pytest.approx(strain_energy_density(eps), rel=1e-10, abs=1e-12)


def test_hex8_rigid_modes_and_rank():
    KE = hex8_stiffness()
    np.testing.assert_allclose(KE, KE.T, atol=1e-14)
    w = np.linalg.eigvalsh(KE)
    assert np.all(w > -1e-12)
    assert np.sum(w < 1e-10) == 6
    skew = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])
    np.testing.assert_allclose(KE @ linear_field(skew), 0.0, atol=1e-12)
    np.testing.assert_allclose(KE @ np.tile([1.0, 2.0, -1.0], 8), 0.0, atol=1e-12)


def test_density_filter_properties():
    cells = np.argwhere(np.ones((5, 4, 3), bool))
    H, Hs = density_filter(cells, 1.5)
    np.testing.assert_allclose((H - H.T).toarray(), 0.0)
    np.testing.assert_allclose(H @ np.ones(len(cells)) / Hs, 1.0)
    # interior cell: 1 self + 6 face neighbours within radius 1.5, plus 12 edge neighbours at sqrt 2
    i = np.flatnonzero((cells == [2, 2, 1]).all(axis=1))[0]
    assert H[i].nnz == 19
    assert H[i, i] == pytest.approx(1.5)


# -- SIMP

def cantilever(nx=16, ny=8, nz=8):
    mask = np.ones((nx, ny, nz), bool)
    fixed = np.argwhere(mask[:1])
    load = np.array([[nx - 1, ny // 2, 0]])
    return mask, fixed, load, np.array([[0.0, 0.0, -1.0]])


@pytest.fixture(scope="module")
def cantilever_run():
    mask, fixed, load, F = cantilever()
    return simp_optimize(mask, fixed, load, F, volume_fraction=0.3, iters=40), (mask, fixed, load, F)


def test_cantilever_beats_uniform(cantilever_run):
    res, (mask, fixed, load, F) = cantilever_run
    uniform = compliance(mask, np.full(mask.sum(), 0.3), fixed, load, F)
    assert res.final_compliance < 0.5 * uniform


def test_cantilever_volume_and_bounds(cantilever_run):
    res, (mask, *_) = cantilever_run
    assert res.density[mask].mean() == pytest.approx(0.3, abs=1e-3)
    assert res.density.min() >= 0.0 and res.density.max() <= 1.0
    np.testing.assert_allclose(res.volume_history, 0.3, atol=1e-3)


def test_cantilever_history_settles(cantilever_run):
    c = np.asarray(cantilever_run[0].compliance_history)
    assert np.all(c[6:] <= c[5:-1] * 1.01)
    assert c[-1] < c[0]


def test_masked_cells_stay_empty():
    mask, fixed, load, F = cantilever(8, 4, 4)
    mask[3:5, :2, :] = False
    res = simp_optimize(mask, fixed, load, F, volume_fraction=0.4, iters=10)
    assert np.all(res.density[~mask] == 0.0)
    assert np.all((res.density[mask] >= 0) & (res.density[mask] <= 1))


def test_iterative_and_direct_solves_agree(monkeypatch):
    mask, fixed, load, F = cantilever()
    rho = np.random.default_rng(0).uniform(0.05, 1.0, mask.sum())
    amg = compliance(mask, rho, fixed, load, F)  # ~3900 free dofs: AMG-preconditioned CG
    monkeypatch.setattr(simp_mod, "DIRECT_SOLVE_MAX_DOFS", 10 ** 9)
    direct = compliance(mask, rho, fixed, load, F)
    assert amg == pytest.approx(direct, rel=1e-6)


def test_disconnected_boundary_raises():
    mask = np.ones((8, 4, 4), bool)
    mask[4] = False
    with pytest.raises(ValueError, match="connected"):
        simp_optimize(mask, np.argwhere(mask[:1]), [[7, 2, 2]], [[0, 0, -1.0]], iters=1)
    with pytest.raises(ValueError):
        simp_optimize(mask, np.zeros((0, 3), int), [[7, 2, 2]], [[0, 0, -1.0]], iters=1)
    with pytest.raises(ValueError):
        simp_optimize(mask, np.argwhere(mask[:1]), [[4, 2, 2]], [[0, 0, -1.0]], iters=1)


def test_simp_deterministic():
    mask, fixed, load, F = cantilever()
    a = simp_optimize(mask, fixed, load, F, 0.3, iters=3)
    b = simp_optimize(mask, fixed, load, F, 0.3, iters=3)
    assert np.array_equal(a.density, b.density)


def test_solid_cells_held_and_outside_budget():
    mask, fixed, load, F = cantilever(8, 4, 4)
    res = simp_optimize(mask, fixed, load, F, volume_fraction=0.2, iters=8, solid_cells=fixed)
    assert np.all(res.density[tuple(fixed.T)] == 1.0)
    design = mask.copy()
    design[tuple(fixed.T)] = False
    assert res.density[design].mean() == pytest.approx(0.2, abs=1e-3)


def test_field_keeps_thin_members():
    from pasgrip.geometry.voxel import VoxelGrid
    from pasgrip.topopt.extract import gripper_field

    d = np.zeros((12, 7, 7), np.float32)
    d[1:11, 3, 3] = 1.0  # a one-cell rod that smoothing alone would erase
    grid = VoxelGrid(np.zeros(3), 1.0, d)
    none = np.zeros(d.shape, bool)
    f = gripper_field(grid, none, none, np.zeros((0, 3)), 0.5).values
    assert np.all(f[1:11, 3, 3] >= 0.5)
    assert f[1, 3, 3] == 1.0 and f[0, 3, 3] < 0.5


# -- free volume, loads, extraction on a real grasp

def mesh_components(m):
    F = m.faces
    n = len(m.vertices)
    A = sp.coo_matrix((np.ones(F.size), (F.ravel(), np.roll(F, 1, axis=1).ravel())), shape=(n, n))
    return connected_components(A, directed=False)[0]


@pytest.fixture(scope="module")
def gripper_run(notched_scene):
    s = notched_scene
    return run_topopt(s.mesh, s.robot, s.gc, s.solution.skeleton, s.solution.keyframes,
                      TopoptParams(voxel_size=0.005))


def test_free_volume_excludes_swept(notched_scene, gripper_run):
    free = gripper_run.free.values > 0.5
    assert gripper_run.swept.any()
    assert not (free & gripper_run.swept).any()
    # the gripper never keeps density in swept cells
    assert np.all(gripper_run.density.values[gripper_run.swept] == 0.0)


def test_free_volume_grows_when_motion_is_dropped(notched_scene, gripper_run):
    s = notched_scene
    kf = s.solution.keyframes
    still = collision_free_volume(s.mesh, np.stack([kf[-1], kf[-1]]), s.robot, 0.005, s.solution.skeleton)
    moving = collision_free_volume(s.mesh, kf, s.robot, 0.005, s.solution.skeleton)
    # the grasp pose is one of the swept poses, so holding still occupies a subset
    assert not (still.swept & ~moving.swept).any()
    assert np.all((still.grid.values > 0.5) >= (moving.grid.values > 0.5))


def test_joint_inside_object_rejected(notched_scene):
    s = notched_scene
    skel = s.solution.skeleton.copy()
    skel[0, 1] = s.mesh.center_of_mass + np.array([0.04, 0.0, 0.0])
    with pytest.raises(TopoptError):
        collision_free_volume(s.mesh, s.solution.keyframes, s.robot, 0.005, skel)


def test_contact_loads_unit_total(notched_scene):
    gc = notched_scene.gc
    L = contact_loads(gc, notched_scene.mesh.center_of_mass, notched_scene.mesh.bounding_sphere_radius)
    mags = np.linalg.norm(L, axis=1)
    assert mags.sum() == pytest.approx(1.0)
    assert np.all(mags >= 1.0 / 6.0 - 1e-12)
    np.testing.assert_allclose(L / mags[:, None], -gc.normals, atol=1e-12)


def test_gripper_mesh_contracts(notched_scene, gripper_run):
    g = gripper_run.gripper
    assert g.is_watertight() and g.volume > 0
    assert gripper_run.compliance_history[-1] < gripper_run.compliance_history[0]
    r = TopoptParams(voxel_size=0.005).sphere_r
    contacts = notched_scene.gc.positions
    # a pad reaches every contact
    for c in contacts:
        assert np.linalg.norm(g.vertices - c, axis=1).min() <= r
    # the mount block holds the FFO (flush with the flange plane, so probe just in front of it)
    axis = fk_matrices(notched_scene.robot, notched_scene.grasp_q)[:3, 2]
    assert point_inside(g, notched_scene.ffo + 0.005 * axis)
    # one printable piece: mount, members and pads are connected
    assert mesh_components(g) == 1
    free_cells = int((gripper_run.free.values > 0.5).sum())
    assert g.volume <= free_cells * 0.005 ** 3
    # any overlap with the object at the grasp pose is confined to the contact pads
    sample = g.vertices[:: max(1, len(g.vertices) // 400)]
    inside = np.array([point_inside(notched_scene.mesh, v) for v in sample])
    if inside.any():
        d = np.linalg.norm(sample[inside][:, None] - contacts[None], axis=2).min(axis=1)
        assert np.all(d <= r + 0.005 * np.sqrt(3))
