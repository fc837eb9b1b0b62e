"""Forward kinematics against hand-worked poses and finite differences."""

import numpy as np
import pytest

from kaczplan.kinematics import (ROBOT_DOF, RobotModel, SystemConfiguration,
                                 arm_points, arm_points_all, fk_all,
                                 fk_jacobian, fk_jacobian_all,
                                 forward_kinematics, wrap_angle)


def test_arm_points_all_matches_scalar():
    m = RobotModel()
    rng = np.random.default_rng(3)
    Q = rng.uniform(-2, 2, (25, ROBOT_DOF))
    sh, el, tp = arm_points_all(m, Q)
    for k in range(25):
        s1, e1, t1 = arm_points(m, Q[k])
        assert sh[k] == pytest.approx(s1)
        assert el[k] == pytest.approx(e1)
        assert tp[k] == pytest.approx(t1)
    # tips agree with the end-effector FK
    pos, _ = fk_all(m, Q)
    assert tp == pytest.approx(pos)


def test_wrap_angle_range_and_fixed_points():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    a = np.linspace(-20, 20, 733)
    w = wrap_angle(a)
    assert np.all(w > -np.pi - 1e-15) and np.all(w <= np.pi + 1e-15)
    # wrapping preserves the angle modulo 2 pi
    assert np.allclose(np.cos(w), np.cos(a))
    assert np.allclose(np.sin(w), np.sin(a))


def test_fk_straight_up_arm():
    # zero joint angles: tip sits mount + l1 + l2 above the base origin
    m = RobotModel()
    pos, ori = forward_kinematics(m, [1.0, 2.0, 0.5, np.pi / 2, 0.0, 0.0])
    reach = m.arm_mount_offset[2] + m.link_lengths.sum()
    assert pos == pytest.approx([1.0, 2.0, 0.5 + reach])
    assert ori == pytest.approx([0.0, 0.0, 1.0])


def test_fk_elbow_level_arm():
    # shoulder at 90 degrees folds the whole arm into the body +y direction
    m = RobotModel()
    pos, ori = forward_kinematics(m, [0.0, 0.0, 0.0, 0.0, np.pi / 2, 0.0])
    assert pos == pytest.approx([0.0, m.link_lengths.sum(),
                                 m.arm_mount_offset[2]])
    assert ori == pytest.approx([0.0, 1.0, 0.0])


def test_fk_yaw_rotates_body_offset():
    m = RobotModel()
    q_body = [0.0, 0.0, 0.0, 0.0, 0.7, -0.3]
    p0, _ = forward_kinematics(m, q_body)
    yaw = 2.1
    p1, _ = forward_kinematics(m, [0.0, 0.0, 0.0, yaw, 0.7, -0.3])
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert p1 == pytest.approx(R @ p0)


def test_fk_orientation_is_unit():
    rng = np.random.default_rng(11)
    m = RobotModel()
    Q = rng.uniform(-2, 2, (64, ROBOT_DOF))
    _, ori = fk_all(m, Q)
    assert np.linalg.norm(ori, axis=1) == pytest.approx(np.ones(64))


def test_fk_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    m = RobotModel()
    h = 1e-6
    for _ in range(50):
        qr = rng.uniform(-2, 2, ROBOT_DOF)
        J = fk_jacobian(m, qr)
        for k in range(ROBOT_DOF):
            dq = np.zeros(ROBOT_DOF)
            dq[k] = h
            pp, op = forward_kinematics(m, qr + dq)
            pm, om = forward_kinematics(m, qr - dq)
            fd = np.concatenate([(pp - pm), (op - om)]) / (2 * h)
            assert J[:, k] == pytest.approx(fd, abs=1e-7)


def test_arm_points_tip_matches_fk():
    rng = np.random.default_rng(3)
    m = RobotModel()
    for _ in range(20):
        qr = rng.uniform(-2, 2, ROBOT_DOF)
        sh, el, tip = arm_points(m, qr)
        pos, _ = forward_kinematics(m, qr)
        assert tip == pytest.approx(pos)
        assert np.linalg.norm(el - sh) == pytest.approx(m.link_lengths[0])
        assert np.linalg.norm(tip - el) == pytest.approx(m.link_lengths[1])


def test_velocity_dofs_have_zero_fk_columns():
    m = RobotModel(dof=8)
    Jp, Jo = fk_jacobian_all(m, np.zeros((2, 8)))
    assert not Jp[:, :, 6:].any()
    assert not Jo[:, :, 6:].any()


def test_system_configuration_roundtrip():
    cfg = SystemConfiguration.from_robots([[1, 2, 3, 0.1, 0.2, 0.3],
                                           [4, 5, 6, 0.4, 0.5, 0.6]])
    assert cfg.n == 2 and cfg.dof == 6 and cfg.m == 12
    assert cfg.robot(1)[0] == 4
    assert cfg == cfg.copy()
    with pytest.raises(ValueError):
        SystemConfiguration(np.zeros(7), 2, 6)
    with pytest.raises(ValueError):
        SystemConfiguration.from_robots([[1] * 6, [1] * 5])


def test_robot_model_validation():
    with pytest.raises(ValueError):
        RobotModel(link_lengths=[0.2, 0.0])
    with pytest.raises(ValueError):
        RobotModel(joint_limits=np.zeros((3, 2)))
    lim = np.zeros((6, 2))
    lim[:, 0] = 1.0   # lower above upper
    with pytest.raises(ValueError):
        RobotModel(joint_limits=lim)


def test_with_position_bounds():
    m = RobotModel().with_position_bounds([-1, -2, 0], [1, 2, 3])
    assert m.joint_limits[0].tolist() == [-1, 1]
    assert m.joint_limits[2].tolist() == [0, 3]
    # arm limits untouched
    assert m.joint_limits[4].tolist() == [-np.pi / 2, np.pi / 2]
