import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pasgrip.geometry import RigidTransform
from pasgrip.kinematics import (IKError, RobotModel, Trajectory, default_robot, fk_matrices, floor_penetration,
                                forward_kinematics, interpolate, inverse_kinematics)

ROBOT = default_robot()
joints = arrays(np.float64, 6, elements=st.floats(-np.pi, np.pi))


def fk_oracle(dh, q, base=np.eye(4)):
    """Textbook DH chain Rz(theta) Tz(d) Tx(a) Rx(alpha), written out matrix by matrix."""
    T = base.copy()
    for (a, alpha, d, off), qi in zip(dh, q):
        th = qi + off
        Rz = np.array([[np.cos(th), -np.sin(th), 0, 0], [np.sin(th), np.cos(th), 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
        Tz = np.eye(4)
        Tz[2, 3] = d
        Tx = np.eye(4)
        Tx[0, 3] = a
        Rx = np.array([[1, 0, 0, 0], [0, np.cos(alpha), -np.sin(alpha), 0], [0, np.sin(alpha), np.cos(alpha), 0],
                       [0, 0, 0, 1]])
        T = T @ Rz @ Tz @ Tx @ Rx
    return T


def test_fk_zero_matches_oracle():
    np.testing.assert_allclose(fk_matrices(ROBOT, np.zeros(6)), fk_oracle(ROBOT.dh, np.zeros(6)), atol=1e-12)


def test_fk_random_matches_oracle(rng):
    for q in rng.uniform(-np.pi, np.pi, (100, 6)):
        np.testing.assert_allclose(fk_matrices(ROBOT, q), fk_oracle(ROBOT.dh, q), atol=1e-9)


def test_fk_batched_matches_single(rng):
    q = rng.uniform(-np.pi, np.pi, (7, 6))
    batch = fk_matrices(ROBOT, q)
    for i in range(7):
        np.testing.assert_allclose(batch[i], fk_matrices(ROBOT, q[i]), atol=1e-14)


def test_fk_base_pose_applied(rng):
    base = RigidTransform.from_axis_angle((0, 0, 1), 0.7, (0.1, -0.2, 0.3))
    r = RobotModel(ROBOT.dh, ROBOT.joint_limits, base)
    q = rng.uniform(-1, 1, 6)
    np.testing.assert_allclose(fk_matrices(r, q), base.matrix() @ fk_matrices(ROBOT, q), atol=1e-12)


@given(joints)
def test_joint1_half_turn_negates_xy(q):
    a = forward_kinematics(ROBOT, q).translation
    q2 = q.copy()
    q2[0] += np.pi
    b = forward_kinematics(ROBOT, q2).translation
    np.testing.assert_allclose(b, [-a[0], -a[1], a[2]], atol=1e-9)


@given(joints, arrays(np.float64, (2, 3), elements=st.floats(-0.3, 0.3)))
def test_fk_is_rigid(q, pts):
    T = forward_kinematics(ROBOT, q)
    assert abs(np.linalg.det(T.rotation) - 1) < 1e-9
    np.testing.assert_allclose(T.rotation @ T.rotation.T, np.eye(3), atol=1e-9)
    w = T.apply(pts)
    assert np.linalg.norm(w[0] - w[1]) == pytest.approx(np.linalg.norm(pts[0] - pts[1]), abs=1e-12)


def test_ik_roundtrip_from_perturbed_start(rng):
    for _ in range(20):
        q = rng.uniform(-2, 2, 6)
        target = forward_kinematics(ROBOT, q)
        sol = inverse_kinematics(ROBOT, target, q + rng.normal(0, 0.05, 6))
        T = forward_kinematics(ROBOT, sol)
        assert np.linalg.norm(T.translation - target.translation) < 1e-6
        assert ROBOT.within_limits(sol)


def test_ik_success_rate_from_zero(rng):
    ok = 0
    for _ in range(100):
        target = forward_kinematics(ROBOT, rng.uniform(-np.pi, np.pi, 6))
        try:
            sol = inverse_kinematics(ROBOT, target, np.zeros(6))
        except IKError:
            continue
        T = forward_kinematics(ROBOT, sol)
        assert np.linalg.norm(T.translation - target.translation) <= 1e-4
        ok += 1
    assert ok >= 90


def test_ik_unreachable_reports_residual():
    far = RigidTransform.from_translation((10 * ROBOT.reach, 0, 0))
    with pytest.raises(IKError) as e:
        inverse_kinematics(ROBOT, far, np.zeros(6), restarts=1)
    assert e.value.position_error > ROBOT.reach


def test_interpolate_endpoints_and_midpoint():
    k = np.array([[0.0] * 6, [1.0] * 6])
    tr = Trajectory(k)
    np.testing.assert_array_equal(interpolate(tr, 0.0), k[0])
    np.testing.assert_array_equal(interpolate(tr, 1.0), k[1])
    np.testing.assert_allclose(interpolate(tr, 0.5), 0.5)


@given(arrays(np.float64, (4, 6), elements=st.floats(-3, 3)), st.floats(0, 1 - 1e-6))
def test_interpolate_lipschitz(k, t):
    tr = Trajectory(k)
    span = np.abs(np.diff(k, axis=0)).max()
    d = np.abs(interpolate(tr, t + 1e-6) - interpolate(tr, t)).max()
    assert d <= span * 1e-6 * (len(k) - 1) + 1e-12


@given(arrays(np.float64, (3, 6), elements=st.floats(-3, 3)), st.floats(0, 1), st.floats(0, 1))
def test_interpolate_affine_within_interval(k, a, b):
    tr = Trajectory(k)
    # both samples and their midpoint inside the first interval [0, 0.5]
    ta, tb = 0.5 * a, 0.5 * b
    mid = interpolate(tr, 0.5 * (ta + tb))
    np.testing.assert_allclose(mid, 0.5 * (interpolate(tr, ta) + interpolate(tr, tb)), atol=1e-12)


def test_trajectory_needs_two_keyframes():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((1, 6)))


def test_floor_penetration():
    q = np.array([0.0, -np.pi / 2, 0.0, 0.0, 0.0, 0.0])  # arm upright
    z = forward_kinematics(ROBOT, q).translation[2]
    assert floor_penetration(ROBOT, q, z - 0.1) == 0.0
    assert floor_penetration(ROBOT, q, z + 0.02) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        floor_penetration(ROBOT, q, -1.0)


def test_robot_config_roundtrip(tmp_path):
    (tmp_path / "r.json").write_text(json.dumps(ROBOT.to_dict()))
    r = RobotModel.load(tmp_path / "r.json")
    np.testing.assert_array_equal(r.dh, ROBOT.dh)
    np.testing.assert_array_equal(r.joint_limits, ROBOT.joint_limits)
    assert r.dof == 6
    d = ROBOT.to_dict()
    assert set(d) >= {"dh", "joint_limits_rad", "base_pose"}
    assert len(d["base_pose"]["rotation"]) == 9


def test_robot_rejects_bad_limits():
    with pytest.raises(ValueError):
        RobotModel(ROBOT.dh, np.tile([1.0, -1.0], (6, 1)))
