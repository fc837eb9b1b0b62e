"""Scenario definitions: structures, environments, and scenario files.

A scenario bundles the robot model, team size, carried structure, manifold
set, workspace, and start/goal structure poses.  Reference scenarios T_3,
S_3, S_4, I_5, S_5 and S_6 (structure shape + team size) are built here,
with manifold row enumerations chosen to match their published constraint
counts (12, 14, 30, 37, 52, 80 rows respectively).
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from .constraints import (KIND_ANGLE, KIND_DISTANCE, KIND_ORIENT, KIND_PLANE,
                          ConstraintError, ManifoldSpec, Structure,
                          assemble_system)
from .kinematics import ROBOT_DOF, RobotModel, SystemConfiguration

SCHEMA_VERSION = 1

_BAR_HALF = 0.03  # half thickness of structure bars

COMPLEXITY_BANDS = {
    "low": (0.05, 0.099),
    "medium": (0.10, 0.199),
    "hard": (0.20, 0.30),
}


class ScenarioError(ValueError):
    """Scenario construction or schema violation."""


# -- structures -----------------------------------------------------------

def make_structure(kind, length=None, spacing=0.5):
    """Build a rigid structure with contact points and collision boxes.

    kind "straight" needs length, a positive multiple of spacing; "t" and
    "i" use the fixed shapes (1 m bar + 0.5 m stem, and 1 m x 1 m I-beam
    with five contacts: center first, then the four flange ends).
    """
    kind = kind.lower()
    if kind == "straight":
        if length is None or length <= 0:
            raise ScenarioError("straight structure needs a positive length")
        count = length / spacing
        if abs(count - round(count)) > 1e-9:
            raise ScenarioError(
                f"length {length} is not a multiple of spacing {spacing}")
        count = int(round(count)) + 1
        xs = np.linspace(-length / 2, length / 2, count)
        contacts = np.column_stack([xs, np.zeros(count), np.zeros(count)])
        boxes = [((0.0, 0.0, 0.0), (length / 2 + _BAR_HALF, _BAR_HALF,
                                    _BAR_HALF))]
        return Structure(contacts, boxes, name=f"straight_{length:g}")
    if kind == "t":
        contacts = np.array([[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0],
                             [0.0, -0.5, 0.0]])
        boxes = [((0.0, 0.0, 0.0), (0.5, _BAR_HALF, _BAR_HALF)),
                 ((0.0, -0.25, 0.0), (_BAR_HALF, 0.25, _BAR_HALF))]
        return Structure(contacts, boxes, name="t_shape")
    if kind == "i":
        contacts = np.array([[0.0, 0.0, 0.0],
                             [-0.5, 0.5, 0.0], [0.5, 0.5, 0.0],
                             [-0.5, -0.5, 0.0], [0.5, -0.5, 0.0]])
        boxes = [((0.0, 0.5, 0.0), (0.5, _BAR_HALF, _BAR_HALF)),
                 ((0.0, -0.5, 0.0), (0.5, _BAR_HALF, _BAR_HALF)),
                 ((0.0, 0.0, 0.0), (_BAR_HALF, 0.5, _BAR_HALF))]
        return Structure(contacts, boxes, name="i_shape")
    raise ScenarioError(f"unsupported structure kind {kind!r}")


# -- environments ---------------------------------------------------------

@dataclass
class Environment:
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    obstacles_lo: np.ndarray   # (k, 3)
    obstacles_hi: np.ndarray
    complexity_class: str = "low"
    seed: int = 0

    def __post_init__(self):
        self.bounds_lo = np.asarray(self.bounds_lo, float)
        self.bounds_hi = np.asarray(self.bounds_hi, float)
        self.obstacles_lo = np.asarray(self.obstacles_lo, float).reshape(-1, 3)
        self.obstacles_hi = np.asarray(self.obstacles_hi, float).reshape(-1, 3)

    @property
    def clutter_ratio(self):
        vol = np.prod(self.obstacles_hi - self.obstacles_lo, axis=1).sum()
        return float(vol / np.prod(self.bounds_hi - self.bounds_lo))

    def to_dict(self):
        return {
            "bounds": [self.bounds_lo.tolist(), self.bounds_hi.tolist()],
            "obstacles": [[lo.tolist(), hi.tolist()] for lo, hi in
                          zip(self.obstacles_lo, self.obstacles_hi)],
            "complexity_class": self.complexity_class,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        obs = d.get("obstacles", [])
        lo = np.array([o[0] for o in obs]).reshape(-1, 3)
        hi = np.array([o[1] for o in obs]).reshape(-1, 3)
        return cls(np.array(d["bounds"][0]), np.array(d["bounds"][1]),
                   lo, hi, d.get("complexity_class", "low"),
                   d.get("seed", 0))


def generate_environment(complexity, bounds_lo, bounds_hi, seed,
                         clear_regions=(), max_attempts=20000):
    """Seeded random box field whose total volume lands in the complexity
    band.  clear_regions are (lo, hi) AABBs kept obstacle-free (start and
    goal corridors)."""
    complexity = complexity.lower()
    if complexity not in COMPLEXITY_BANDS:
        raise ScenarioError(f"unknown complexity {complexity!r}")
    lo_band, hi_band = COMPLEXITY_BANDS[complexity]
    rng = np.random.default_rng(seed)
    bounds_lo = np.asarray(bounds_lo, float)
    bounds_hi = np.asarray(bounds_hi, float)
    total = float(np.prod(bounds_hi - bounds_lo))
    target = rng.uniform(lo_band, hi_band * 0.98)

    boxes_lo, boxes_hi = [], []
    vol = 0.0
    attempts = 0
    while vol / total < target and attempts < max_attempts:
        attempts += 1
        size = rng.uniform(1.0, 4.0, 3)
        # shrink the last box instead of overshooting the band
        room = (hi_band * total) - vol
        if np.prod(size) > room:
            size *= (room / np.prod(size)) ** (1 / 3) * 0.95
        center = rng.uniform(bounds_lo + size / 2, bounds_hi - size / 2)
        blo, bhi = center - size / 2, center + size / 2
        if any(np.all(blo <= chi) and np.all(clo <= bhi)
               for clo, chi in clear_regions):
            continue
        boxes_lo.append(blo)
        boxes_hi.append(bhi)
        vol += float(np.prod(size))
    ratio = vol / total
    if ratio < lo_band:
        raise ScenarioError(
            f"could not reach clutter band {complexity} (got {ratio:.3f})")
    return Environment(bounds_lo, bounds_hi, np.array(boxes_lo),
                       np.array(boxes_hi), complexity, seed)


# -- scenarios ------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    team_size: int
    structure: Structure
    manifolds: list
    model: RobotModel = None
    environment: Environment | None = None
    workspace_lo: np.ndarray = field(
        default_factory=lambda: np.array([-10.0, -10.0, 0.0]))
    workspace_hi: np.ndarray = field(
        default_factory=lambda: np.array([10.0, 10.0, 20.0]))
    start_pose: np.ndarray = field(
        default_factory=lambda: np.array([-7.5, -7.5, 1.0, 0.0]))
    goal_pose: np.ndarray = field(
        default_factory=lambda: np.array([7.5, 7.5, 1.0, 0.0]))
    seed: int = 0

    def __post_init__(self):
        self.workspace_lo = np.asarray(self.workspace_lo, float)
        self.workspace_hi = np.asarray(self.workspace_hi, float)
        self.start_pose = np.asarray(self.start_pose, float)
        self.goal_pose = np.asarray(self.goal_pose, float)
        if self.model is None:
            self.model = RobotModel()
        self.model = self.model.with_position_bounds(
            self.workspace_lo + self.model.base_half_extents,
            self.workspace_hi - self.model.base_half_extents)
        if self.structure is not None and len(self.structure) != self.team_size:
            raise ScenarioError(
                f"{len(self.structure)} contact points for "
                f"{self.team_size} robots")
        # manifold applicability is validated by assembly
        self.assemble()

    def assemble(self):
        try:
            return assemble_system(self.model, self.team_size, self.manifolds,
                                   structure=self.structure)
        except ConstraintError as e:
            raise ScenarioError(str(e)) from e

    def team_configuration(self, structure_pose):
        """Robot configurations grasping the structure at a given pose.

        Bases sit directly below their contact points with vertical arms, so
        every constraint row is satisfied exactly for horizontal poses.
        """
        x, y, z, yaw = structure_pose
        c, s = np.cos(yaw), np.sin(yaw)
        R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        world = self.structure.contact_points @ R.T + np.array([x, y, z])
        reach = (self.model.arm_mount_offset[2]
                 + self.model.link_lengths.sum())
        robots = []
        for p in world:
            robots.append([p[0], p[1], p[2] - reach, yaw, 0.0, 0.0])
        return SystemConfiguration.from_robots(robots)

    def start_configuration(self):
        return self.team_configuration(self.start_pose)

    def goal_configuration(self):
        return self.team_configuration(self.goal_pose)

    def clear_regions(self, margin=2.0):
        """AABBs around start and goal kept free of obstacles."""
        out = []
        for pose in (self.start_pose, self.goal_pose):
            span = np.abs(self.structure.contact_points).max() + margin
            center = np.array([pose[0], pose[1], pose[2]])
            out.append((center - span, center + span))
        return out

    def to_dict(self):
        d = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "team_size": self.team_size,
            "structure": self.structure.to_dict(),
            "manifolds": [m.to_dict() for m in self.manifolds],
            "robot_model": {
                "base_half_extents": self.model.base_half_extents.tolist(),
                "link_lengths": self.model.link_lengths.tolist(),
                "arm_mount_offset": self.model.arm_mount_offset.tolist(),
                "joint_limits": self.model.joint_limits.tolist(),
            },
            "workspace": [self.workspace_lo.tolist(),
                          self.workspace_hi.tolist()],
            "start_pose": self.start_pose.tolist(),
            "goal_pose": self.goal_pose.tolist(),
            "seed": self.seed,
        }
        if self.environment is not None:
            d["environment"] = self.environment.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        validate_scenario_dict(d)
        rm = d["robot_model"]
        model = RobotModel(rm["base_half_extents"], rm["link_lengths"],
                           rm["arm_mount_offset"],
                           np.asarray(rm["joint_limits"]))
        env = (Environment.from_dict(d["environment"])
               if "environment" in d else None)
        return cls(name=d["name"], team_size=d["team_size"],
                   structure=Structure.from_dict(d["structure"]),
                   manifolds=[ManifoldSpec.from_dict(m)
                              for m in d["manifolds"]],
                   model=model, environment=env,
                   workspace_lo=np.array(d["workspace"][0]),
                   workspace_hi=np.array(d["workspace"][1]),
                   start_pose=np.array(d["start_pose"]),
                   goal_pose=np.array(d["goal_pose"]),
                   seed=d.get("seed", 0))


_SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "name", "team_size", "structure",
                 "manifolds", "robot_model", "workspace", "start_pose",
                 "goal_pose"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "team_size": {"type": "integer", "minimum": 1},
        "structure": {
            "type": "object",
            "required": ["contact_points", "boxes"],
            "properties": {
                "contact_points": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 3, "maxItems": 3,
                              "items": {"type": "number"}},
                },
            },
        },
        "manifolds": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"type": "string"},
                    "threshold": {"type": "number", "minimum": 0},
                    "weight": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "workspace": {"type": "array", "minItems": 2, "maxItems": 2},
        "start_pose": {"type": "array", "minItems": 4, "maxItems": 4},
        "goal_pose": {"type": "array", "minItems": 4, "maxItems": 4},
    },
}


def validate_scenario_dict(d):
    if jsonschema is None:  # pragma: no cover
        return
    validator = jsonschema.Draft202012Validator(_SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(d), key=lambda e: list(e.path))
    if errors:
        msgs = ["/".join(str(p) for p in e.path) + ": " + e.message
                for e in errors]
        raise ScenarioError("scenario schema violation: " + "; ".join(msgs))


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)
        fh.write("\n")


def load_scenario(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"invalid scenario file: {e}") from e
    return Scenario.from_dict(d)


# -- reference scenarios --------------------------------------------------

def _straight_manifolds():
    return [
        ManifoldSpec(KIND_DISTANCE, pairs="all"),
        ManifoldSpec(KIND_ANGLE, triples="anchored", anchor=0),
        ManifoldSpec(KIND_ORIENT, orient_rows="pair_endpoints"),
        ManifoldSpec(KIND_PLANE, pairs="all"),
    ]


def _reference(name):
    if name.startswith("S_"):
        n = int(name[2:])
        structure = make_structure("straight", length=0.5 * (n - 1))
        manifolds = _straight_manifolds()
    elif name == "T_3":
        n = 3
        structure = make_structure("t")
        # the three pairwise distances of a triangle already fix its angles,
        # so the angle manifold is omitted for the T shape
        manifolds = [
            ManifoldSpec(KIND_DISTANCE, pairs="all"),
            ManifoldSpec(KIND_ORIENT, orient_rows="pair_endpoints"),
            ManifoldSpec(KIND_PLANE, pairs="all"),
        ]
    elif name == "I_5":
        n = 5
        structure = make_structure("i")
        manifolds = [
            ManifoldSpec(KIND_DISTANCE, pairs="all"),
            ManifoldSpec(KIND_ANGLE, triples="anchored", anchor=0),
            ManifoldSpec(KIND_ORIENT, orient_rows="per_robot"),
            ManifoldSpec(KIND_PLANE, pairs="all"),
        ]
    else:
        raise ScenarioError(f"unknown reference scenario {name!r}")
    return Scenario(name=name, team_size=n, structure=structure,
                    manifolds=manifolds)


REFERENCE_NAMES = ("T_3", "S_3", "S_4", "I_5", "S_5", "S_6")


def reference_scenario(name):
    """One of the bundled planning scenarios: T_3 S_3 S_4 I_5 S_5 S_6."""
    if name not in REFERENCE_NAMES:
        raise ScenarioError(f"unknown reference scenario {name!r}; "
                            f"choose from {REFERENCE_NAMES}")
    ref = importlib.resources.files("kaczplan") / "data" / f"{name}.json"
    try:
        with ref.open() as fh:
            return Scenario.from_dict(json.load(fh))
    except FileNotFoundError:
        # source checkout before the data files were generated
        return _reference(name)


# manifold sets used by the projection benchmark on the 3-robot straight
# structure; enumerations are pinned to the published row counts.  The
# benchmark deliberately uses the raw (unnormalized) angle/orientation
# residuals: they grow with robot separation, which is what separates the
# row-action solvers from the full-Jacobian baselines in the success grid.
PROJECTION_SETS = {
    "m1_m3": (
        [ManifoldSpec(KIND_DISTANCE, pairs="all"),
         ManifoldSpec(KIND_ORIENT, orient_rows="per_robot",
                      normalized=False)], 6),
    "m3_m4": (
        [ManifoldSpec(KIND_ORIENT, orient_rows="pair_endpoints",
                      normalized=False),
         ManifoldSpec(KIND_PLANE, pairs="chain")], 8),
    "m1_m2_m3": (
        [ManifoldSpec(KIND_DISTANCE, pairs="all"),
         ManifoldSpec(KIND_ANGLE, triples="ordered", normalized=False),
         ManifoldSpec(KIND_ORIENT, orient_rows="per_robot",
                      normalized=False)], 12),
    "m1_m2_m3_m4": (
        [ManifoldSpec(KIND_DISTANCE, pairs="all"),
         ManifoldSpec(KIND_ANGLE, triples="anchored", anchor=0,
                      normalized=False),
         ManifoldSpec(KIND_ORIENT, orient_rows="pair_endpoints",
                      normalized=False),
         ManifoldSpec(KIND_PLANE, pairs="all")], 14),
}


def projection_benchmark_scenario(set_name):
    """3-robot straight-bar scenario with one of the benchmark manifold
    sets (m1_m3, m3_m4, m1_m2_m3, m1_m2_m3_m4)."""
    if set_name not in PROJECTION_SETS:
        raise ScenarioError(f"unknown manifold set {set_name!r}; "
                            f"choose from {sorted(PROJECTION_SETS)}")
    manifolds, _ = PROJECTION_SETS[set_name]
    return Scenario(name=f"proj_{set_name}", team_size=3,
                    structure=make_structure("straight", length=1.0),
                    manifolds=[ManifoldSpec.from_dict(m.to_dict())
                               for m in manifolds])
