"""Constrained RRT over the composite configuration space.

Steering projects each extension back onto the manifold intersection with
the configured solver; nodes violating joint limits or colliding (robot
bases, arm links, carried structure, environment boxes) are rejected.
Constraint satisfaction is enforced at nodes only; edge interpolation is
collision-checked but not re-projected, a documented fidelity gap.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import collision
from .kinematics import (SystemConfiguration, arm_points, arm_points_all,
                         fk_all, wrap_angle)
from .solvers import SolverParams, project

PATH_SCHEMA_VERSION = 1

# configuration metric weights per DoF kind
_W_POS = 1.0
_W_YAW = 0.5
_W_ARM = 0.2
_W_VEL = 0.1


class PlannerError(ValueError):
    """Structural misuse: invalid start/goal, failed plan export, etc."""


@dataclass
class PlannerParams:
    max_nodes: int = 5000
    max_iterations: int = 0   # 0 means 10x max_nodes
    steer_step: float = 0.3
    goal_bias: float = 0.1
    goal_tolerance: float = 0.2
    sample_mode: str = "joint"   # "joint" or "pose"
    projection_solver: SolverParams = field(
        default_factory=lambda: SolverParams(method="cnkz", max_steps=4000))
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.goal_bias <= 1.0:
            raise PlannerError("goal_bias must be in [0, 1]")
        if self.steer_step <= 0 or self.goal_tolerance <= 0:
            raise PlannerError("steer_step and goal_tolerance must be > 0")
        if self.max_nodes < 1:
            raise PlannerError("max_nodes must be >= 1")
        if self.sample_mode not in ("joint", "pose"):
            raise PlannerError("sample_mode must be 'joint' or 'pose'")
        if self.max_iterations < 1:
            self.max_iterations = 10 * self.max_nodes


def _metric_weights(dof):
    w = np.empty(dof)
    w[0:3] = _W_POS
    w[3] = _W_YAW
    w[4:6] = _W_ARM
    if dof > 6:
        w[6:] = _W_VEL
    return w


def configuration_difference(a, b, dof):
    """Per-DoF difference a - b with yaw components wrapped to (-pi, pi]."""
    d = (np.asarray(a, float) - np.asarray(b, float)).reshape(-1, dof)
    d[:, 3] = wrap_angle(d[:, 3])
    return d.ravel()


def configuration_metric(a, b, dof=6):
    """Weighted Euclidean distance between two flat configurations."""
    d = configuration_difference(a, b, dof).reshape(-1, dof)
    return float(np.linalg.norm(d * _metric_weights(dof)))


def _metric_to_many(Q, q, dof):
    """Distances from each row of Q (k, m) to q (m,)."""
    d = (Q - q[None, :]).reshape(len(Q), -1, dof)
    d[:, :, 3] = wrap_angle(d[:, :, 3])
    d = d * _metric_weights(dof)[None, None, :]
    return np.linalg.norm(d.reshape(len(Q), -1), axis=1)


# -- feasibility checks ---------------------------------------------------

def joint_limits_ok(model, q, n):
    Q = np.asarray(q, float).reshape(n, model.dof)
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    Qw = Q.copy()
    Qw[:, 3] = wrap_angle(Qw[:, 3])
    return bool(np.all(Qw >= lo - 1e-12) and np.all(Qw <= hi + 1e-12))


def fit_structure_pose(structure, tips):
    """Least-squares yaw + translation fit of contact points onto tips.

    Returns (yaw, translation, max point error).  The structure is carried
    flat, so the fit is a planar rotation about z plus a 3D offset.
    """
    pts = structure.contact_points
    pc = pts - pts.mean(axis=0)
    tc = tips - tips.mean(axis=0)
    # planar Procrustes for the yaw angle
    s = float(pc[:, 0] @ tc[:, 1] - pc[:, 1] @ tc[:, 0])
    c = float(pc[:, 0] @ tc[:, 0] + pc[:, 1] @ tc[:, 1])
    yaw = float(np.arctan2(s, c)) if (abs(s) > 0 or abs(c) > 0) else 0.0
    cy, sy = np.cos(yaw), np.sin(yaw)
    R = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    t = tips.mean(axis=0) - pts.mean(axis=0) @ R.T
    err = float(np.max(np.linalg.norm(pts @ R.T + t - tips, axis=1)))
    return yaw, t, err


def _scenario_obstacles(scenario):
    env = scenario.environment
    if env is not None and len(env.obstacles_lo):
        return env.obstacles_lo, env.obstacles_hi
    empty = np.empty((0, 3))
    return empty, empty


def batch_collision(scenario, Qs):
    """True when any configuration in the stack Qs (t, n*dof) collides.

    One vectorized pass over all robots and configurations: bases and arm
    links against the obstacle boxes, every base pair against each other,
    and the carried structure against the obstacles.
    """
    model = scenario.model
    n = scenario.team_size
    t = len(Qs)
    Qr = np.asarray(Qs, float).reshape(t * n, -1)
    obs_lo, obs_hi = _scenario_obstacles(scenario)
    half = model.base_half_extents
    centers = Qr[:, 0:3]
    yaws = Qr[:, 3]
    if len(obs_lo):
        if collision.yawboxes_vs_aabbs(centers, half, yaws,
                                       obs_lo, obs_hi).any():
            return True
        sh, el, tip = arm_points_all(model, Qr)
        if (collision.segments_vs_aabbs(sh, el, obs_lo, obs_hi)
                or collision.segments_vs_aabbs(el, tip, obs_lo, obs_hi)):
            return True
    if n > 1:
        ii, jj = np.triu_indices(n, 1)
        base = np.arange(t)[:, None] * n
        ai = (base + ii[None, :]).ravel()
        bj = (base + jj[None, :]).ravel()
        if collision.yawboxes_vs_yawboxes(centers[ai], half, yaws[ai],
                                          centers[bj], half,
                                          yaws[bj]).any():
            return True
    if (scenario.structure is not None and scenario.structure.boxes
            and len(obs_lo)):
        tips, _ = fk_all(model, Qr)
        tips = tips.reshape(t, n, 3)
        for bc, bh in scenario.structure.boxes:
            wc = np.empty((t, 3))
            wyaw = np.empty(t)
            for k in range(t):
                yaw, tr, _ = fit_structure_pose(scenario.structure, tips[k])
                cy, sy = np.cos(yaw), np.sin(yaw)
                R = np.array([[cy, -sy, 0.0], [sy, cy, 0.0],
                              [0.0, 0.0, 1.0]])
                wc[k] = R @ bc + tr
                wyaw[k] = yaw
            if collision.yawboxes_vs_aabbs(wc, np.asarray(bh, float), wyaw,
                                           obs_lo, obs_hi).any():
                return True
    return False


def collision_check(scenario, q):
    """(in_collision, first offending pair description or None)."""
    if not batch_collision(scenario, np.asarray(q, float)[None, :]):
        return False, None
    hit, pair = _collision_describe(scenario, q)
    # the batched and per-pair tests agree mathematically; keep a generic
    # label in case rounding at a grazing contact splits them
    return True, (pair if hit else "collision")


def _collision_describe(scenario, q):
    model = scenario.model
    n = scenario.team_size
    Q = np.asarray(q, float).reshape(n, model.dof)
    env = scenario.environment
    if env is not None and len(env.obstacles_lo):
        obs_lo, obs_hi = env.obstacles_lo, env.obstacles_hi
    else:
        obs_lo = obs_hi = np.empty((0, 3))

    half = model.base_half_extents
    centers = Q[:, 0:3]
    yaws = Q[:, 3]
    for i in range(n):
        if collision.yawbox_vs_aabbs(centers[i], half, yaws[i],
                                     obs_lo, obs_hi):
            return True, f"base[{i}] vs obstacle"
        sh, el, tip = arm_points(model, Q[i])
        if (collision.segment_vs_aabbs(sh, el, obs_lo, obs_hi)
                or collision.segment_vs_aabbs(el, tip, obs_lo, obs_hi)):
            return True, f"arm[{i}] vs obstacle"
    for i in range(n):
        for j in range(i + 1, n):
            if collision.yawbox_vs_yawbox(centers[i], half, yaws[i],
                                          centers[j], half, yaws[j]):
                return True, f"base[{i}] vs base[{j}]"
    if scenario.structure is not None and scenario.structure.boxes:
        tips, _ = fk_all(model, Q)
        yaw, t, err = fit_structure_pose(scenario.structure, tips)
        cy, sy = np.cos(yaw), np.sin(yaw)
        R = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        for bi, (bc, bh) in enumerate(scenario.structure.boxes):
            world_c = R @ bc + t
            if collision.yawbox_vs_aabbs(world_c, bh, yaw, obs_lo, obs_hi):
                return True, f"structure_box[{bi}] vs obstacle"
    return False, None


def structure_fit_error(scenario, q):
    """Max contact-fit error of the carried structure at configuration q."""
    Q = np.asarray(q, float).reshape(scenario.team_size, scenario.model.dof)
    tips, _ = fk_all(scenario.model, Q)
    return fit_structure_pose(scenario.structure, tips)[2]


# -- planning -------------------------------------------------------------

@dataclass
class PlanStats:
    nodes: int = 0
    iterations: int = 0
    projections_attempted: int = 0
    projections_converged: int = 0
    projection_updates: int = 0
    projection_time: float = 0.0
    collision_rejections: int = 0
    limit_rejections: int = 0
    fit_rejections: int = 0

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class PlanResult:
    success: bool
    path: list
    tree: np.ndarray
    parents: np.ndarray
    stats: PlanStats
    wall_time: float
    scenario_name: str = ""
    seed: int = 0
    method: str = "cnkz"


def _sample_uniform(rng, model, n):
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    return rng.uniform(lo, hi, (n, model.dof)).ravel()


# carry heights are sampled within this margin of the start/goal heights;
# transport tasks stay in a band, and sampling the whole vertical extent
# of a tall workspace wastes nearly every extension on clutter
_POSE_Z_MARGIN = 3.0


def _sample_pose(rng, scenario):
    """Team configuration grasping the structure at a random pose.

    Samples x, y, yaw uniformly in workspace bounds and a carry height
    near the start/goal band, compatible with the base z limits, then
    expands the pose to a full team configuration.  Targets drawn this
    way are coherent grasps, so steering toward them keeps the tree near
    the constraint manifold.
    """
    lo, hi = scenario.workspace_lo, scenario.workspace_hi
    jl = scenario.model.joint_limits
    reach = (scenario.model.arm_mount_offset[2]
             + scenario.model.link_lengths.sum())
    zs, zg = scenario.start_pose[2], scenario.goal_pose[2]
    z_lo = max(jl[2, 0] + reach, min(zs, zg) - _POSE_Z_MARGIN)
    z_hi = min(jl[2, 1] + reach, max(zs, zg) + _POSE_Z_MARGIN)
    if z_hi < z_lo:
        z_lo, z_hi = jl[2, 0] + reach, jl[2, 1] + reach
    pose = np.array([rng.uniform(lo[0], hi[0]),
                     rng.uniform(lo[1], hi[1]),
                     rng.uniform(z_lo, z_hi),
                     rng.uniform(-np.pi, np.pi)])
    return scenario.team_configuration(pose).q


def _edge_clear(scenario, qa, qb, dof, steer_step):
    """Collision-check interpolated substeps along an edge (<= step/10)."""
    d = configuration_difference(qb, qa, dof)
    length = configuration_metric(qa, qb, dof)
    k = max(1, int(np.ceil(length / (steer_step / 10.0))))
    ts = np.linspace(0.0, 1.0, k + 1)[1:-1]
    if not len(ts):
        return True
    return not batch_collision(scenario, qa[None, :] + ts[:, None] * d[None, :])


def plan(scenario, start, goal, params=None):
    """Constrained RRT from start to goal (SystemConfigurations or flat)."""
    params = params or PlannerParams()
    t0 = time.perf_counter()
    csystem = scenario.assemble()
    model = scenario.model
    n = scenario.team_size
    dof = model.dof
    q_start = (start.q if isinstance(start, SystemConfiguration)
               else np.asarray(start, float)).copy()
    q_goal = (goal.q if isinstance(goal, SystemConfiguration)
              else np.asarray(goal, float)).copy()

    for label, qq in (("start", q_start), ("goal", q_goal)):
        if not csystem.is_satisfied(qq):
            raise PlannerError(f"{label} configuration violates constraints")
        if not joint_limits_ok(model, qq, n):
            raise PlannerError(f"{label} configuration violates joint limits")
        hit, pair = collision_check(scenario, qq)
        if hit:
            raise PlannerError(f"{label} configuration in collision ({pair})")

    rng = np.random.default_rng(params.rng_seed)
    cap = params.max_nodes
    tree = np.empty((cap, q_start.size))
    parents = np.full(cap, -1, dtype=int)
    tree[0] = q_start
    count = 1
    stats = PlanStats(nodes=1)
    fit_tol = None
    if scenario.structure is not None:
        m1 = [m.threshold for m in scenario.manifolds
              if m.kind == "StructureFixedDistance"]
        if m1:
            fit_tol = 2.0 * m1[0]

    def try_extend(near_idx, target):
        """One projected step from tree[near_idx] toward target.

        Returns the index of the new node or None.
        """
        nonlocal count
        q_near = tree[near_idx]
        d = configuration_difference(target, q_near, dof)
        dist = configuration_metric(q_near, target, dof)
        if dist < 1e-12:
            return None
        step = min(1.0, params.steer_step / dist)
        q_new = q_near + step * d
        # cheap pre-filter: projection moves the steered point very little,
        # so an already-colliding candidate is not worth projecting
        if batch_collision(scenario, q_new[None, :]):
            stats.collision_rejections += 1
            return None
        stats.projections_attempted += 1
        report = project(csystem, q_new, params.projection_solver)
        stats.projection_updates += report.updates_used
        stats.projection_time += report.wall_time
        if not report.converged:
            return None
        stats.projections_converged += 1
        q_new = report.q
        q_new.reshape(n, dof)[:, 3] = wrap_angle(q_new.reshape(n, dof)[:, 3])
        if not joint_limits_ok(model, q_new, n):
            stats.limit_rejections += 1
            return None
        if fit_tol is not None and structure_fit_error(scenario,
                                                       q_new) > fit_tol:
            stats.fit_rejections += 1
            return None
        hit, _ = collision_check(scenario, q_new)
        if hit or not _edge_clear(scenario, q_near, q_new, dof,
                                  params.steer_step):
            stats.collision_rejections += 1
            return None
        tree[count] = q_new
        parents[count] = near_idx
        count += 1
        stats.nodes = count
        return count - 1

    def path_from(idx):
        out = []
        while idx >= 0:
            out.append(tree[idx].copy())
            idx = parents[idx]
        out.reverse()
        return out

    goal_idx = None
    if configuration_metric(q_start, q_goal, dof) <= params.goal_tolerance:
        goal_idx = 0
    while (goal_idx is None and count < cap
           and stats.iterations < params.max_iterations):
        stats.iterations += 1
        if rng.uniform() < params.goal_bias:
            target = q_goal
        elif params.sample_mode == "pose" and scenario.structure is not None:
            target = _sample_pose(rng, scenario)
        else:
            target = _sample_uniform(rng, model, n)
        dists = _metric_to_many(tree[:count], target, dof)
        new_idx = try_extend(int(np.argmin(dists)), target)
        if new_idx is None:
            continue
        # greedy goal connection whenever a node lands near the goal
        if configuration_metric(tree[new_idx], q_goal,
                                dof) <= 2.0 * params.goal_tolerance:
            cur = new_idx
            while count < cap:
                if configuration_metric(tree[cur], q_goal,
                                        dof) <= params.goal_tolerance:
                    goal_idx = cur
                    break
                nxt = try_extend(cur, q_goal)
                if nxt is None:
                    break
                cur = nxt

    wall = time.perf_counter() - t0
    if goal_idx is not None:
        path = path_from(goal_idx)
        if configuration_metric(path[-1], q_goal, dof) > 1e-12:
            path.append(q_goal.copy())
        return PlanResult(True, path, tree[:count].copy(), parents[:count].copy(),
                          stats, wall, scenario.name, params.rng_seed,
                          params.projection_solver.method)
    return PlanResult(False, [], tree[:count].copy(), parents[:count].copy(),
                      stats, wall, scenario.name, params.rng_seed,
                      params.projection_solver.method)


# -- path files and rendering ---------------------------------------------

def path_export(result, scenario, path, svg_path=None):
    """Write a successful plan as versioned JSON (+ optional SVG render)."""
    if not result.success:
        raise PlannerError("cannot export a failed plan")
    csystem = scenario.assemble()
    nodes = []
    for q in result.path:
        residuals = [float(np.max(np.abs(r)))
                     for r in csystem.manifold_residuals(q)]
        nodes.append({"q": [float(v) for v in q],
                      "max_residuals": residuals})
    doc = {
        "schema_version": PATH_SCHEMA_VERSION,
        "scenario": scenario.name,
        "team_size": scenario.team_size,
        "dof": scenario.model.dof,
        "seed": result.seed,
        "method": result.method,
        "nodes": nodes,
        "stats": result.stats.to_dict(),
        "wall_time": result.wall_time,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if svg_path is not None:
        render_path_svg(scenario, [np.asarray(nd["q"]) for nd in nodes],
                        svg_path)
    return doc


def path_import(path):
    """Load an exported path file; returns (waypoints list, document)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != PATH_SCHEMA_VERSION:
        raise PlannerError(
            f"unsupported path schema {doc.get('schema_version')!r}")
    waypoints = [np.asarray(nd["q"], float) for nd in doc["nodes"]]
    return waypoints, doc


def render_path_svg(scenario, waypoints, out_path):
    """Top-down X-Y rendering of robot traces, structure, and obstacles."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    fig, ax = plt.subplots(figsize=(7, 7))
    lo, hi = scenario.workspace_lo, scenario.workspace_hi
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    env = scenario.environment
    if env is not None:
        for blo, bhi in zip(env.obstacles_lo, env.obstacles_hi):
            ax.add_patch(Rectangle((blo[0], blo[1]), bhi[0] - blo[0],
                                   bhi[1] - blo[1], facecolor="0.75",
                                   edgecolor="0.5", zorder=1))
    n = scenario.team_size
    dof = scenario.model.dof
    traces = np.asarray(waypoints).reshape(len(waypoints), n, dof)
    cmap = plt.get_cmap("tab10")
    for i in range(n):
        ax.plot(traces[:, i, 0], traces[:, i, 1], "-o", ms=2.5, lw=1.2,
                color=cmap(i % 10), zorder=3, label=f"robot {i}")
    if scenario.structure is not None:
        for qi in (0, len(waypoints) - 1):
            tips, _ = fk_all(scenario.model, traces[qi])
            yaw, t, _ = fit_structure_pose(scenario.structure, tips)
            cy, sy = np.cos(yaw), np.sin(yaw)
            R2 = np.array([[cy, -sy], [sy, cy]])
            pts = scenario.structure.contact_points[:, :2] @ R2.T + t[:2]
            ax.plot(pts[:, 0], pts[:, 1], "ks-", ms=4, lw=2, alpha=0.6,
                    zorder=4)
    ax.plot(*scenario.start_pose[:2], "g^", ms=10, zorder=5)
    ax.plot(*scenario.goal_pose[:2], "r*", ms=13, zorder=5)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(scenario.name)
    ax.legend(loc="upper left", fontsize=8)
    fig.savefig(out_path, format="svg", bbox_inches="tight")
    plt.close(fig)
