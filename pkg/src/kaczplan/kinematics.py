"""Mobile-manipulator model and forward kinematics.

Each robot is a floating box base (x, y, z, yaw) carrying a planar 2-link
arm that operates in the base body's Y-Z plane.  Joint angles are measured
from the body +z axis, so at zero angles the arm points straight up from
the shoulder mount.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BASE_DOF = 4  # x, y, z, yaw
ARM_DOF = 2
ROBOT_DOF = BASE_DOF + ARM_DOF
ROBOT_DOF_VEL = ROBOT_DOF + 2  # + (u_x, u_y) planar velocity


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = -((-a + np.pi) % (2.0 * np.pi) - np.pi)
    return float(out) if out.ndim == 0 else out


def _default_joint_limits(dof):
    lim = np.empty((dof, 2))
    lim[0:3] = [-10.0, 10.0]      # base position, overridden by workspace
    lim[3] = [-np.pi, np.pi]
    lim[4:6] = [-np.pi / 2, np.pi / 2]
    if dof == ROBOT_DOF_VEL:
        lim[6:8] = [-1.0, 1.0]
    return lim


@dataclass
class RobotModel:
    """Geometry and limits shared by every robot in a scenario."""

    base_half_extents: np.ndarray = field(
        default_factory=lambda: np.array([0.2, 0.2, 0.2]))
    link_lengths: np.ndarray = field(
        default_factory=lambda: np.array([0.2, 0.1]))
    arm_mount_offset: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, 0.2]))
    joint_limits: np.ndarray | None = None
    dof: int = ROBOT_DOF

    def __post_init__(self):
        self.base_half_extents = np.asarray(self.base_half_extents, float)
        self.link_lengths = np.asarray(self.link_lengths, float)
        self.arm_mount_offset = np.asarray(self.arm_mount_offset, float)
        if np.any(self.link_lengths <= 0):
            raise ValueError("link_lengths must be strictly positive")
        if self.joint_limits is None:
            self.joint_limits = _default_joint_limits(self.dof)
        else:
            self.joint_limits = np.asarray(self.joint_limits, float)
            if self.joint_limits.shape != (self.dof, 2):
                raise ValueError(
                    f"joint_limits must be ({self.dof}, 2), "
                    f"got {self.joint_limits.shape}")
        if np.any(self.joint_limits[:, 0] > self.joint_limits[:, 1]):
            raise ValueError("joint limit lower bound exceeds upper bound")

    @property
    def has_velocity(self):
        return self.dof == ROBOT_DOF_VEL

    def with_position_bounds(self, lo, hi):
        """Copy of the model with base x/y/z limits set from workspace bounds."""
        lim = self.joint_limits.copy()
        lim[0:3, 0] = np.asarray(lo, float)
        lim[0:3, 1] = np.asarray(hi, float)
        return RobotModel(self.base_half_extents.copy(),
                          self.link_lengths.copy(),
                          self.arm_mount_offset.copy(), lim, self.dof)


class SystemConfiguration:
    """Stacked configuration of n robots as one flat vector of length n*dof."""

    __slots__ = ("q", "n", "dof")

    def __init__(self, q, n, dof=ROBOT_DOF):
        q = np.asarray(q, dtype=float).ravel()
        if q.size != n * dof:
            raise ValueError(f"expected {n * dof} values, got {q.size}")
        self.q = q
        self.n = n
        self.dof = dof

    @classmethod
    def from_robots(cls, robot_vectors):
        rows = [np.asarray(r, float).ravel() for r in robot_vectors]
        dof = rows[0].size
        if any(r.size != dof for r in rows):
            raise ValueError("all robots must share one DoF count")
        return cls(np.concatenate(rows), len(rows), dof)

    def robot(self, i):
        return self.q[i * self.dof:(i + 1) * self.dof]

    def robots(self):
        return self.q.reshape(self.n, self.dof)

    def copy(self):
        return SystemConfiguration(self.q.copy(), self.n, self.dof)

    @property
    def m(self):
        return self.q.size

    def __eq__(self, other):
        return (isinstance(other, SystemConfiguration)
                and self.n == other.n and self.dof == other.dof
                and np.array_equal(self.q, other.q))


def fk_position_orientation(model, qr):
    """End-effector position and unit orientation for one robot vector."""
    pos, ori = fk_all(model, np.asarray(qr, float).reshape(1, -1))
    return pos[0], ori[0]


def fk_all(model, Q):
    """Vectorized FK for a (n, dof) block of robot vectors.

    Returns (positions (n,3), orientations (n,3)).  The orientation is the
    unit direction of the distal link in the world frame.
    """
    Q = np.asarray(Q, float)
    x, y, z, yaw = Q[:, 0], Q[:, 1], Q[:, 2], Q[:, 3]
    a1, a2 = Q[:, 4], Q[:, 5]
    l1, l2 = model.link_lengths
    ox, oy, oz = model.arm_mount_offset
    cy, sy = np.cos(yaw), np.sin(yaw)
    # arm chain in the body frame (y-z plane, angles from +z)
    by = oy + l1 * np.sin(a1) + l2 * np.sin(a1 + a2)
    bz = oz + l1 * np.cos(a1) + l2 * np.cos(a1 + a2)
    bx = np.full_like(by, ox)
    pos = np.empty((len(Q), 3))
    pos[:, 0] = x + cy * bx - sy * by
    pos[:, 1] = y + sy * bx + cy * by
    pos[:, 2] = z + bz
    dy, dz = np.sin(a1 + a2), np.cos(a1 + a2)
    ori = np.empty((len(Q), 3))
    ori[:, 0] = -sy * dy
    ori[:, 1] = cy * dy
    ori[:, 2] = dz
    return pos, ori


def fk_jacobian_all(model, Q):
    """Analytic FK Jacobians for a (n, dof) block.

    Returns (Jpos (n,3,dof), Jori (n,3,dof)).  Velocity DoFs, when present,
    have identically zero columns.
    """
    Q = np.asarray(Q, float)
    n, dof = Q.shape
    yaw, a1, a2 = Q[:, 3], Q[:, 4], Q[:, 5]
    l1, l2 = model.link_lengths
    ox, oy, oz = model.arm_mount_offset
    cy, sy = np.cos(yaw), np.sin(yaw)
    s1, c1 = np.sin(a1), np.cos(a1)
    s12, c12 = np.sin(a1 + a2), np.cos(a1 + a2)

    by = oy + l1 * s1 + l2 * s12
    bx = np.full_like(by, ox)
    dby_da1 = l1 * c1 + l2 * c12
    dbz_da1 = -l1 * s1 - l2 * s12
    dby_da2 = l2 * c12
    dbz_da2 = -l2 * s12

    Jp = np.zeros((n, 3, dof))
    Jp[:, 0, 0] = 1.0
    Jp[:, 1, 1] = 1.0
    Jp[:, 2, 2] = 1.0
    Jp[:, 0, 3] = -sy * bx - cy * by
    Jp[:, 1, 3] = cy * bx - sy * by
    Jp[:, 0, 4] = -sy * dby_da1
    Jp[:, 1, 4] = cy * dby_da1
    Jp[:, 2, 4] = dbz_da1
    Jp[:, 0, 5] = -sy * dby_da2
    Jp[:, 1, 5] = cy * dby_da2
    Jp[:, 2, 5] = dbz_da2

    Jo = np.zeros((n, 3, dof))
    Jo[:, 0, 3] = -cy * s12
    Jo[:, 1, 3] = -sy * s12
    for col in (4, 5):
        Jo[:, 0, col] = -sy * c12
        Jo[:, 1, col] = cy * c12
        Jo[:, 2, col] = -s12
    return Jp, Jo


def arm_points(model, qr):
    """World-frame shoulder, elbow and tip points of one robot's arm.

    The tip equals the FK end-effector position; the three points define
    the two link segments used for collision checking.
    """
    qr = np.asarray(qr, float)
    x, y, z, yaw, a1, a2 = qr[:6]
    l1, l2 = model.link_lengths
    cy, sy = np.cos(yaw), np.sin(yaw)

    def to_world(b):
        return np.array([x + cy * b[0] - sy * b[1],
                         y + sy * b[0] + cy * b[1],
                         z + b[2]])

    shoulder_b = model.arm_mount_offset
    elbow_b = shoulder_b + np.array([0.0, l1 * np.sin(a1), l1 * np.cos(a1)])
    tip_b = elbow_b + np.array([0.0, l2 * np.sin(a1 + a2),
                                l2 * np.cos(a1 + a2)])
    return to_world(shoulder_b), to_world(elbow_b), to_world(tip_b)


def arm_points_all(model, Q):
    """Vectorized arm_points for a (k, dof) block.

    Returns (shoulders, elbows, tips), each (k, 3), matching arm_points
    row by row.
    """
    Q = np.asarray(Q, float)
    x, y, z, yaw = Q[:, 0], Q[:, 1], Q[:, 2], Q[:, 3]
    a1, a12 = Q[:, 4], Q[:, 4] + Q[:, 5]
    l1, l2 = model.link_lengths
    cy, sy = np.cos(yaw), np.sin(yaw)

    def to_world(bx, by, bz):
        out = np.empty((len(Q), 3))
        out[:, 0] = x + cy * bx - sy * by
        out[:, 1] = y + sy * bx + cy * by
        out[:, 2] = z + bz
        return out

    ox, oy, oz = model.arm_mount_offset
    sh = to_world(np.full_like(x, ox), np.full_like(x, oy),
                  np.full_like(x, oz))
    ey, ez = oy + l1 * np.sin(a1), oz + l1 * np.cos(a1)
    el = to_world(np.full_like(x, ox), ey, ez)
    tp = to_world(np.full_like(x, ox), ey + l2 * np.sin(a12),
                  ez + l2 * np.cos(a12))
    return sh, el, tp


def forward_kinematics(model, qr):
    """Single-robot FK; thin wrapper kept for symmetry with fk_jacobian."""
    return fk_position_orientation(model, qr)


def fk_jacobian(model, qr):
    """(6, dof) stacked [position; orientation] Jacobian for one robot."""
    Jp, Jo = fk_jacobian_all(model, np.asarray(qr, float).reshape(1, -1))
    return np.vstack([Jp[0], Jo[0]])
