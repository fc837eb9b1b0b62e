"""Box and capsule collision primitives.

Environment obstacles are axis-aligned boxes.  Robot bases and structure
parts are yaw-rotated boxes (rotation about z only), so box-vs-box tests
reduce to a 2D separating-axis check in the x-y plane plus a z interval
overlap.  Arm links are treated as thin capsules and tested by sampling
points along the segment against inflated boxes.
"""

from __future__ import annotations

import numpy as np

CAPSULE_RADIUS = 0.02
_SEG_SAMPLE_STEP = 0.05


def aabb_overlap(lo_a, hi_a, lo_b, hi_b):
    return bool(np.all(lo_a <= hi_b) and np.all(lo_b <= hi_a))


def point_in_aabbs(points, lo, hi):
    """points (k,3) vs boxes lo/hi (b,3): (k,) true where inside any box."""
    points = np.atleast_2d(points)
    if len(lo) == 0:
        return np.zeros(len(points), dtype=bool)
    inside = np.all((points[:, None, :] >= lo[None]) &
                    (points[:, None, :] <= hi[None]), axis=2)
    return inside.any(axis=1)


def _corners_2d(center, half, yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.array([[c, -s], [s, c]])
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    return center[:2] + (signs * half[:2]) @ R.T


def _sat_2d(corners_a, corners_b, axes):
    for ax in axes:
        pa = corners_a @ ax
        pb = corners_b @ ax
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def yawbox_vs_yawbox(ca, ha, yaw_a, cb, hb, yaw_b):
    """Overlap test for two z-upright boxes with yaw rotations."""
    if ca[2] + ha[2] < cb[2] - hb[2] or cb[2] + hb[2] < ca[2] - ha[2]:
        return False
    A = _corners_2d(ca, ha, yaw_a)
    B = _corners_2d(cb, hb, yaw_b)
    cya, sya = np.cos(yaw_a), np.sin(yaw_a)
    cyb, syb = np.cos(yaw_b), np.sin(yaw_b)
    axes = np.array([[cya, sya], [-sya, cya], [cyb, syb], [-syb, cyb]])
    return _sat_2d(A, B, axes)


def yawbox_vs_aabbs(center, half, yaw, lo, hi):
    """Yaw-rotated box against a batch of AABBs; True if any overlap."""
    if len(lo) == 0:
        return False
    # cheap reject on the rotated box's own AABB
    c, s = abs(np.cos(yaw)), abs(np.sin(yaw))
    ext = np.array([c * half[0] + s * half[1],
                    s * half[0] + c * half[1], half[2]])
    blo, bhi = center - ext, center + ext
    cand = np.nonzero(np.all(blo <= hi, axis=1) &
                      np.all(lo <= bhi, axis=1))[0]
    if cand.size == 0:
        return False
    corners = _corners_2d(center, half, yaw)
    cya, sya = np.cos(yaw), np.sin(yaw)
    axes = np.array([[1.0, 0.0], [0.0, 1.0], [cya, sya], [-sya, cya]])
    for k in cand:
        if center[2] - half[2] > hi[k][2] or center[2] + half[2] < lo[k][2]:
            continue
        box2d = np.array([[lo[k][0], lo[k][1]], [lo[k][0], hi[k][1]],
                          [hi[k][0], lo[k][1]], [hi[k][0], hi[k][1]]])
        if _sat_2d(corners, box2d, axes):
            return True
    return False


def _yawbox_axis_extents(half, yaws):
    """Half-extents of yawed boxes projected on the world x/y axes."""
    c, s = np.abs(np.cos(yaws)), np.abs(np.sin(yaws))
    return c * half[0] + s * half[1], s * half[0] + c * half[1]


def yawboxes_vs_aabbs(centers, half, yaws, lo, hi):
    """Batch of yaw-rotated boxes against a batch of AABBs.

    centers (k,3), yaws (k,) vs boxes lo/hi (b,3); returns (k,) true where
    a box overlaps any AABB.  Interval form of the same separating-axis
    test as yawbox_vs_aabbs.
    """
    centers = np.atleast_2d(centers)
    yaws = np.atleast_1d(yaws)
    k = len(centers)
    if len(lo) == 0 or k == 0:
        return np.zeros(k, dtype=bool)
    co = 0.5 * (lo + hi)            # (b, 3)
    ho = 0.5 * (hi - lo)
    dz = np.abs(centers[:, 2, None] - co[None, :, 2])
    ok = dz <= half[2] + ho[None, :, 2]
    ex, ey = _yawbox_axis_extents(half, yaws)
    dx = np.abs(centers[:, 0, None] - co[None, :, 0])
    dy = np.abs(centers[:, 1, None] - co[None, :, 1])
    ok &= dx <= ex[:, None] + ho[None, :, 0]
    ok &= dy <= ey[:, None] + ho[None, :, 1]
    cy, sy = np.cos(yaws), np.sin(yaws)
    d2 = centers[:, None, :2] - co[None, :, :2]   # (k, b, 2)
    # the box's own two axes; its projected radius there is just h0 / h1
    du = d2[:, :, 0] * cy[:, None] + d2[:, :, 1] * sy[:, None]
    dv = -d2[:, :, 0] * sy[:, None] + d2[:, :, 1] * cy[:, None]
    acy, asy = np.abs(cy)[:, None], np.abs(sy)[:, None]
    ru = acy * ho[None, :, 0] + asy * ho[None, :, 1]
    rv = asy * ho[None, :, 0] + acy * ho[None, :, 1]
    ok &= np.abs(du) <= half[0] + ru
    ok &= np.abs(dv) <= half[1] + rv
    return ok.any(axis=1)


def yawboxes_vs_yawboxes(ca, ha, ya, cb, hb, yb):
    """Pairwise batch overlap test for two stacks of z-upright yawed boxes.

    ca/cb (K,3), ya/yb (K,); returns (K,) true per pair, the interval form
    of yawbox_vs_yawbox's four-axis separating-axis test.
    """
    ca, cb = np.atleast_2d(ca), np.atleast_2d(cb)
    ya, yb = np.atleast_1d(ya), np.atleast_1d(yb)
    ok = np.abs(ca[:, 2] - cb[:, 2]) <= ha[2] + hb[2]
    d = cb[:, :2] - ca[:, :2]
    for yaw_axes, h_own, h_other in ((ya, ha, hb), (yb, hb, ha)):
        cy, sy = np.cos(yaw_axes), np.sin(yaw_axes)
        rel = yb - ya if h_own is ha else ya - yb
        cr, sr = np.abs(np.cos(rel)), np.abs(np.sin(rel))
        du = d[:, 0] * cy + d[:, 1] * sy
        dv = -d[:, 0] * sy + d[:, 1] * cy
        ru = cr * h_other[0] + sr * h_other[1]
        rv = sr * h_other[0] + cr * h_other[1]
        ok &= np.abs(du) <= h_own[0] + ru
        ok &= np.abs(dv) <= h_own[1] + rv
    return ok


def segments_vs_aabbs(p0, p1, lo, hi, radius=CAPSULE_RADIUS):
    """Batch capsule test: segments p0->p1 (k,3) vs AABBs, sampled densely.

    Returns a single bool: true when any sampled point of any segment is
    inside any inflated box.  The sample count is shared across the batch
    (the densest any segment needs), so results can only be at least as
    strict as per-segment sampling.
    """
    p0, p1 = np.atleast_2d(p0), np.atleast_2d(p1)
    if len(lo) == 0 or len(p0) == 0:
        return False
    d = p1 - p0
    length = float(np.sqrt(np.einsum("ij,ij->i", d, d)).max())
    k = max(2, int(np.ceil(length / _SEG_SAMPLE_STEP)) + 1)
    t = np.linspace(0.0, 1.0, k)
    pts = (p0[:, None, :] + t[None, :, None] * d[:, None, :]).reshape(-1, 3)
    return bool(point_in_aabbs(pts, lo - radius, hi + radius).any())


def segment_vs_aabbs(p0, p1, lo, hi, radius=CAPSULE_RADIUS):
    """Capsule (segment + radius) against AABBs via dense point sampling."""
    if len(lo) == 0:
        return False
    length = float(np.linalg.norm(p1 - p0))
    k = max(2, int(np.ceil(length / _SEG_SAMPLE_STEP)) + 1)
    t = np.linspace(0.0, 1.0, k)
    pts = p0[None] + t[:, None] * (p1 - p0)[None]
    return bool(point_in_aabbs(pts, lo - radius, hi + radius).any())
