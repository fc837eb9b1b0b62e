"""Collision primitives checked against point-sampling oracles."""

import numpy as np
import pytest

from kaczplan.collision import (aabb_overlap, point_in_aabbs, segment_vs_aabbs,
                                segments_vs_aabbs, yawbox_vs_aabbs,
                                yawbox_vs_yawbox, yawboxes_vs_aabbs,
                                yawboxes_vs_yawboxes)


def test_aabb_overlap_basic():
    lo = np.zeros(3)
    hi = np.ones(3)
    assert aabb_overlap(lo, hi, [0.5, 0.5, 0.5], [2, 2, 2])
    assert aabb_overlap(lo, hi, [1.0, 0, 0], [2, 1, 1])   # touching counts
    assert not aabb_overlap(lo, hi, [1.1, 0, 0], [2, 1, 1])


def test_point_in_aabbs():
    lo = np.array([[0, 0, 0], [5, 5, 5]], float)
    hi = np.array([[1, 1, 1], [6, 6, 6]], float)
    pts = np.array([[0.5, 0.5, 0.5], [5.5, 5.5, 5.5], [3, 3, 3]])
    assert point_in_aabbs(pts, lo, hi).tolist() == [True, True, False]
    assert not point_in_aabbs(pts, np.empty((0, 3)), np.empty((0, 3))).any()


def _sample_yawbox(rng, center, half, yaw, k=500):
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    local = rng.uniform(-1, 1, (k, 3)) * half
    return local @ R.T + center


def test_yawbox_vs_yawbox_against_point_sampling():
    # sampled interior points of box A inside box B imply the SAT test hits
    rng = np.random.default_rng(42)
    for _ in range(120):
        ca = rng.uniform(-2, 2, 3)
        cb = rng.uniform(-2, 2, 3)
        ha = rng.uniform(0.2, 1.0, 3)
        hb = rng.uniform(0.2, 1.0, 3)
        ya, yb = rng.uniform(-np.pi, np.pi, 2)
        hit = yawbox_vs_yawbox(ca, ha, ya, cb, hb, yb)
        pts = _sample_yawbox(rng, ca, ha, ya)
        # transform samples into B's frame and test containment
        c, s = np.cos(yb), np.sin(yb)
        R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        local = (pts - cb) @ R
        sampled_hit = bool(np.any(np.all(np.abs(local) <= hb, axis=1)))
        if sampled_hit:
            assert hit   # SAT may report shallow contacts sampling misses
        if not hit:
            assert not sampled_hit


def test_yawbox_vs_yawbox_known_cases():
    h = np.array([0.5, 0.5, 0.5])
    assert yawbox_vs_yawbox(np.zeros(3), h, 0.0, np.array([0.9, 0, 0]),
                            h, 0.0)
    assert not yawbox_vs_yawbox(np.zeros(3), h, 0.0, np.array([1.1, 0, 0]),
                                h, 0.0)
    # 45-degree rotation extends the diagonal enough to touch
    assert yawbox_vs_yawbox(np.zeros(3), h, np.pi / 4,
                            np.array([1.15, 0, 0]), h, 0.0)
    # z separation wins regardless of x-y overlap
    assert not yawbox_vs_yawbox(np.zeros(3), h, 0.3, np.array([0, 0, 1.5]),
                                h, 0.9)


def test_yawbox_vs_aabbs_matches_pairwise():
    rng = np.random.default_rng(13)
    lo = rng.uniform(-3, 1, (8, 3))
    hi = lo + rng.uniform(0.3, 1.5, (8, 3))
    centers = (lo + hi) / 2
    halves = (hi - lo) / 2
    for _ in range(200):
        c = rng.uniform(-3, 3, 3)
        h = rng.uniform(0.1, 0.8, 3)
        yaw = rng.uniform(-np.pi, np.pi)
        batched = yawbox_vs_aabbs(c, h, yaw, lo, hi)
        pairwise = any(yawbox_vs_yawbox(c, h, yaw, centers[k], halves[k], 0.0)
                       for k in range(8))
        assert batched == pairwise
    assert not yawbox_vs_aabbs(np.zeros(3), np.ones(3), 0.5,
                               np.empty((0, 3)), np.empty((0, 3)))


def test_yawboxes_vs_aabbs_matches_scalar():
    rng = np.random.default_rng(7)
    lo = rng.uniform(-3, 1, (10, 3))
    hi = lo + rng.uniform(0.3, 1.5, (10, 3))
    half = np.array([0.25, 0.2, 0.3])
    centers = rng.uniform(-3, 3, (300, 3))
    yaws = rng.uniform(-np.pi, np.pi, 300)
    got = yawboxes_vs_aabbs(centers, half, yaws, lo, hi)
    want = [yawbox_vs_aabbs(centers[k], half, yaws[k], lo, hi)
            for k in range(300)]
    assert got.tolist() == want
    assert not yawboxes_vs_aabbs(centers, half, yaws, np.empty((0, 3)),
                                 np.empty((0, 3))).any()


def test_yawboxes_vs_yawboxes_matches_scalar():
    rng = np.random.default_rng(21)
    ca = rng.uniform(-2, 2, (300, 3))
    cb = rng.uniform(-2, 2, (300, 3))
    ha = np.array([0.5, 0.3, 0.4])
    hb = np.array([0.35, 0.45, 0.5])
    ya = rng.uniform(-np.pi, np.pi, 300)
    yb = rng.uniform(-np.pi, np.pi, 300)
    got = yawboxes_vs_yawboxes(ca, ha, ya, cb, hb, yb)
    want = [yawbox_vs_yawbox(ca[k], ha, ya[k], cb[k], hb, yb[k])
            for k in range(300)]
    assert got.tolist() == want


def test_segments_vs_aabbs_matches_scalar_batch():
    rng = np.random.default_rng(5)
    lo = rng.uniform(-2, 1, (6, 3))
    hi = lo + rng.uniform(0.2, 1.0, (6, 3))
    # equal-length segments so the shared sample count matches the scalar one
    p0 = rng.uniform(-2, 2, (40, 3))
    d = rng.standard_normal((40, 3))
    d = 0.3 * d / np.linalg.norm(d, axis=1, keepdims=True)
    p1 = p0 + d
    want = any(segment_vs_aabbs(p0[k], p1[k], lo, hi) for k in range(40))
    assert segments_vs_aabbs(p0, p1, lo, hi) == want
    assert not segments_vs_aabbs(p0, p1, np.empty((0, 3)), np.empty((0, 3)))


def test_segment_vs_aabbs():
    lo = np.array([[1.0, -0.5, -0.5]])
    hi = np.array([[2.0, 0.5, 0.5]])
    through = segment_vs_aabbs(np.array([0.0, 0, 0]), np.array([3.0, 0, 0]),
                               lo, hi)
    assert through
    miss = segment_vs_aabbs(np.array([0.0, 2.0, 0]), np.array([3.0, 2.0, 0]),
                            lo, hi)
    assert not miss
    # the capsule radius inflates the boxes
    graze = segment_vs_aabbs(np.array([0.0, 0.51, 0]),
                             np.array([3.0, 0.51, 0]), lo, hi, radius=0.02)
    assert graze
    assert not segment_vs_aabbs(np.zeros(3), np.ones(3),
                                np.empty((0, 3)), np.empty((0, 3)))
