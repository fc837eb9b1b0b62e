"""Planner: metric properties, feasibility checks, and small plans."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaczplan.planner import (PlannerError, PlannerParams, _sample_pose,
                              batch_collision, collision_check,
                              configuration_difference, configuration_metric,
                              fit_structure_pose, joint_limits_ok,
                              path_export, path_import, plan, render_path_svg,
                              structure_fit_error)
from kaczplan.scenarios import (Environment, generate_environment,
                                reference_scenario)

finite = st.floats(-50, 50, allow_nan=False)
vec12 = st.lists(finite, min_size=12, max_size=12)


@settings(max_examples=60, deadline=None)
@given(vec12, vec12)
def test_metric_symmetry_and_identity(a, b):
    d_ab = configuration_metric(a, b)
    d_ba = configuration_metric(b, a)
    assert d_ab == pytest.approx(d_ba, rel=1e-12, abs=1e-12)
    assert d_ab >= 0
    assert configuration_metric(a, a) == 0.0


@settings(max_examples=60, deadline=None)
@given(vec12, vec12, vec12)
def test_metric_triangle_inequality(a, b, c):
    assert configuration_metric(a, c) <= (configuration_metric(a, b)
                                          + configuration_metric(b, c)
                                          + 1e-9)


def test_metric_wraps_yaw():
    a = np.zeros(6)
    b = np.zeros(6)
    a[3] = np.pi - 0.05
    b[3] = -np.pi + 0.05
    # across the branch cut the yaw gap is 0.1, not nearly 2 pi
    d = configuration_difference(a, b, 6)
    assert abs(d[3]) == pytest.approx(0.1)
    assert configuration_metric(a, b) < 0.5


def test_joint_limits(model):
    q = np.zeros(12)
    assert joint_limits_ok(model, q, 2)
    q[4] = 2.0   # beyond the pi/2 arm limit
    assert not joint_limits_ok(model, q, 2)
    q[4] = 0.0
    q[3] = 2 * np.pi + 0.1   # wraps into range
    assert joint_limits_ok(model, q, 2)


def test_fit_structure_pose_recovers_known_transform():
    scenario = reference_scenario("S_3")
    pts = scenario.structure.contact_points
    yaw = 0.8
    t = np.array([2.0, -1.0, 3.0])
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    tips = pts @ R.T + t
    got_yaw, got_t, err = fit_structure_pose(scenario.structure, tips)
    assert got_yaw == pytest.approx(yaw)
    assert got_t == pytest.approx(t)
    assert err < 1e-12


def test_structure_fit_error_zero_at_grasp():
    scenario = reference_scenario("S_3")
    assert structure_fit_error(scenario,
                               scenario.start_configuration().q) < 1e-12


def test_collision_check_flags_obstacle():
    scenario = reference_scenario("S_3")
    q = scenario.start_configuration().q
    hit, pair = collision_check(scenario, q)
    assert not hit and pair is None
    # drop a box straight onto robot 0's base
    base = q[0:3]
    scenario.environment = Environment(
        scenario.workspace_lo, scenario.workspace_hi,
        np.array([base - 0.1]), np.array([base + 0.1]))
    hit, pair = collision_check(scenario, q)
    assert hit and "base[0]" in pair


def test_batch_collision_matches_descriptive_walk():
    # the vectorized any-collision kernel and the per-pair walk must agree
    from kaczplan.planner import _collision_describe
    scenario = reference_scenario("S_3")
    scenario.environment = generate_environment(
        "medium", scenario.workspace_lo, scenario.workspace_hi, seed=9)
    rng = np.random.default_rng(17)
    base = scenario.start_configuration().q
    hits = 0
    for _ in range(80):
        q = base + rng.uniform(-3, 3, base.size)
        batched = batch_collision(scenario, q[None, :])
        walked, _ = _collision_describe(scenario, q)
        assert batched == walked
        hits += int(walked)
    assert 0 < hits < 80   # the sample must exercise both outcomes


def test_sample_pose_is_a_valid_grasp():
    scenario = reference_scenario("S_4")
    cs = scenario.assemble()
    rng = np.random.default_rng(2)
    for _ in range(20):
        q = _sample_pose(rng, scenario)
        # coherent grasp: every constraint row holds up to its threshold;
        # bases may poke past workspace limits near the edges, which is
        # fine for a steering target since nodes are limit-checked anyway
        assert cs.is_satisfied(q)


def test_planner_params_validation():
    with pytest.raises(PlannerError):
        PlannerParams(goal_bias=1.5)
    with pytest.raises(PlannerError):
        PlannerParams(steer_step=0.0)
    with pytest.raises(PlannerError):
        PlannerParams(sample_mode="magic")
    assert PlannerParams(max_nodes=10).max_iterations == 100


def test_plan_rejects_invalid_start():
    scenario = reference_scenario("S_3")
    bad = np.zeros(18)   # coincident robots violate the distance rows
    with pytest.raises(PlannerError):
        plan(scenario, bad, scenario.goal_configuration())


def test_trivial_plan_start_equals_goal():
    scenario = reference_scenario("S_3")
    start = scenario.start_configuration()
    result = plan(scenario, start, start, PlannerParams(max_nodes=5))
    assert result.success
    assert len(result.path) >= 1


def test_plan_and_path_roundtrip(tmp_path):
    # short-range plan in an empty workspace stays cheap
    scenario = reference_scenario("S_3")
    scenario.goal_pose = scenario.start_pose + np.array([1.5, 0.5, 0, 0])
    start = scenario.start_configuration()
    goal = scenario.team_configuration(scenario.goal_pose)
    result = plan(scenario, start, goal,
                  PlannerParams(max_nodes=800, rng_seed=3))
    assert result.success
    assert result.stats.nodes == len(result.tree)
    out = tmp_path / "path.json"
    svg = tmp_path / "path.svg"
    doc = path_export(result, scenario, out, svg)
    waypoints, doc2 = path_import(out)
    assert doc2["scenario"] == "S_3"
    assert len(waypoints) == len(result.path)
    assert waypoints[0] == pytest.approx(result.path[0])
    assert svg.stat().st_size > 0
    # every node within manifold thresholds
    cs = scenario.assemble()
    for q in waypoints:
        assert cs.is_satisfied(q)


def test_plan_avoids_obstacles():
    scenario = reference_scenario("S_3")
    scenario.goal_pose = scenario.start_pose + np.array([2.0, 0, 0, 0])
    scenario.environment = generate_environment(
        "low", scenario.workspace_lo, scenario.workspace_hi, seed=1,
        clear_regions=scenario.clear_regions())
    result = plan(scenario, scenario.start_configuration(),
                  scenario.team_configuration(scenario.goal_pose),
                  PlannerParams(max_nodes=800, rng_seed=5))
    assert result.success
    for q in result.path:
        hit, _ = collision_check(scenario, q)
        assert not hit


def test_reduces_to_vanilla_rrt_when_constraints_are_trivial():
    # with an always-satisfied constraint the projector is a no-op and the
    # planner degenerates to plain RRT, which must solve an empty world
    import kaczplan.scenarios as sc
    from kaczplan.constraints import ManifoldSpec
    scenario = sc.Scenario(
        name="free", team_size=2,
        structure=sc.make_structure("straight", length=0.5),
        manifolds=[ManifoldSpec("TaskSamePlane", threshold=1e9)])
    scenario.goal_pose = scenario.start_pose + np.array([3.0, 1.0, 0, 0])
    result = plan(scenario, scenario.start_configuration(),
                  scenario.team_configuration(scenario.goal_pose),
                  PlannerParams(max_nodes=2000, steer_step=0.75, rng_seed=2))
    assert result.success
    assert result.stats.projection_updates == 0


def test_export_failed_plan_raises(tmp_path):
    scenario = reference_scenario("S_3")
    from kaczplan.planner import PlanResult, PlanStats
    failed = PlanResult(False, [], np.zeros((1, 18)), np.array([-1]),
                        PlanStats(), 0.0)
    with pytest.raises(PlannerError):
        path_export(failed, scenario, tmp_path / "x.json")


def test_path_import_rejects_other_schema(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{"schema_version": 99, "nodes": []}')
    with pytest.raises(PlannerError):
        path_import(p)
