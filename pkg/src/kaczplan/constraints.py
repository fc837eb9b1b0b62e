"""Constraint manifolds over the composite robot configuration.

Five manifold families are supported:

  StructureFixedDistance  pairwise end-effector distances match the structure
  StructureFixedAngle     angles between contact-point vectors are preserved
                          (collinear triples use a cross-product norm instead
                          of the dot-product row)
  TaskFixedOrient         end-effector direction orthogonal to contact vectors
  TaskSamePlane           all end-effectors share a plane (default: equal z)
  RobotDiffDrive          no sideways base velocity (needs velocity DoFs)

Each manifold is expanded into scalar residual rows at assembly time.  Which
pairs/triples are enumerated is configurable per manifold (see ManifoldSpec);
the bundled reference scenarios pick enumerations that match the published
intrinsic dimensions for each benchmark case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .kinematics import ROBOT_DOF_VEL, fk_all, fk_jacobian_all

KIND_DISTANCE = "StructureFixedDistance"
KIND_ANGLE = "StructureFixedAngle"
KIND_ORIENT = "TaskFixedOrient"
KIND_PLANE = "TaskSamePlane"
KIND_DIFFDRIVE = "RobotDiffDrive"
MANIFOLD_KINDS = (KIND_DISTANCE, KIND_ANGLE, KIND_ORIENT,
                  KIND_PLANE, KIND_DIFFDRIVE)

DEFAULT_THRESHOLDS = {
    KIND_DISTANCE: 5e-3,   # meters
    KIND_ANGLE: 1e-3,      # dimensionless (cosine / cross norm)
    KIND_ORIENT: 1e-2,     # dimensionless cosine
    KIND_PLANE: 5e-3,      # meters
    KIND_DIFFDRIVE: 1e-3,  # m/s
}

# row kind codes; the _RAW variants skip unit normalization of the pair
# vectors (angle rows then compare raw dot / cross products against raw
# structure-frame targets, orientation rows use the raw difference vector)
(_R_DIST, _R_ANGD, _R_ANGX, _R_ORI, _R_PLANE, _R_DDRV,
 _R_ANGD_RAW, _R_ANGX_RAW, _R_ORI_RAW) = range(9)
_N_ROW_CODES = 9

_COLLINEAR_TOL = 1e-9
_SINGULAR_TOL = 1e-9


class ConstraintError(ValueError):
    """Structural misuse: inapplicable manifold, bad dimensions, etc."""


class Structure:
    """Rigid body carried by the team: contact points plus collision boxes.

    Contact points are expressed in the structure frame.  Collision geometry
    is a union of axis-aligned boxes (center, half_extents) in that frame.
    """

    def __init__(self, contact_points, boxes=(), name="structure"):
        self.contact_points = np.asarray(contact_points, float)
        if self.contact_points.ndim != 2 or self.contact_points.shape[1] != 3:
            raise ConstraintError("contact_points must be (n, 3)")
        self.boxes = [(np.asarray(c, float), np.asarray(h, float))
                      for c, h in boxes]
        self.name = name
        d = self.contact_points[:, None, :] - self.contact_points[None, :, :]
        self.pair_distances = np.linalg.norm(d, axis=2)
        if np.any((self.pair_distances + np.eye(len(self))) <= 0):
            raise ConstraintError("coincident contact points")

    def __len__(self):
        return len(self.contact_points)

    def distance(self, i, j):
        return self.pair_distances[i, j]

    def triple_cosine(self, i, j, k):
        """cos of the angle between v(i,j) and v(j,k) in the structure frame,
        with v(a,b) = point_a - point_b."""
        a = self.contact_points[i] - self.contact_points[j]
        b = self.contact_points[j] - self.contact_points[k]
        c = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        return min(1.0, max(-1.0, c))

    def triple_cross(self, i, j, k):
        """Expected cross product of the unit reference vectors."""
        a = self.contact_points[i] - self.contact_points[j]
        b = self.contact_points[j] - self.contact_points[k]
        return np.cross(a / np.linalg.norm(a), b / np.linalg.norm(b))

    def is_collinear(self, i, j, k):
        return abs(self.triple_cosine(i, j, k)) >= 1.0 - _COLLINEAR_TOL

    def nearest_contact(self, k):
        d = self.pair_distances[k].copy()
        d[k] = np.inf
        return int(np.argmin(d))

    def to_dict(self):
        return {
            "name": self.name,
            "contact_points": self.contact_points.tolist(),
            "boxes": [{"center": c.tolist(), "half_extents": h.tolist()}
                      for c, h in self.boxes],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["contact_points"]),
                   [(b["center"], b["half_extents"]) for b in d["boxes"]],
                   d.get("name", "structure"))


@dataclass
class ManifoldSpec:
    """Declarative description of one manifold instance.

    pairs:       StructureFixedDistance / TaskSamePlane row selection:
                 "all" (every unordered pair), "chain" (consecutive contacts),
                 or an explicit list of [i, j].
    triples:     StructureFixedAngle selection: "anchored" (ordered (a, j, k)
                 with a fixed anchor contact), "middle" (every unordered pair
                 of endpoints around every middle contact), "ordered" (every
                 ordered distinct triple), or explicit [i, j, k] list.
    orient_rows: TaskFixedOrient selection: "pair_endpoints" (each unordered
                 pair checked against both endpoint orientations),
                 "per_robot" (each robot against its nearest contact segment),
                 or explicit [i, j, k] list.
    normalized:  angle/orientation rows only.  True (default) compares
                 unit-normalized pair vectors, so residuals are dimensionless
                 and scale-free.  False keeps the raw vectors: angle rows
                 compare raw dot / cross products against the raw
                 structure-frame targets and orientation rows project the raw
                 difference vector.  Raw residuals grow with robot separation,
                 which makes the system much harsher for full-Jacobian
                 solvers; the projection benchmark uses this variant.
    """

    kind: str
    threshold: float | None = None
    weight: float = 1.0
    pairs: object = "all"
    triples: object = "anchored"
    anchor: int = 0
    orient_rows: object = "pair_endpoints"
    normalized: bool = True

    def __post_init__(self):
        if self.kind not in MANIFOLD_KINDS:
            raise ConstraintError(f"unknown manifold kind {self.kind!r}")
        if self.threshold is None:
            self.threshold = DEFAULT_THRESHOLDS[self.kind]
        if self.threshold < 0:
            raise ConstraintError("threshold must be >= 0")
        if self.weight <= 0:
            raise ConstraintError("weight must be > 0")

    def to_dict(self):
        d = {"kind": self.kind, "threshold": self.threshold,
             "weight": self.weight}
        if self.kind in (KIND_DISTANCE, KIND_PLANE):
            d["pairs"] = (self.pairs if isinstance(self.pairs, str)
                          else [list(p) for p in self.pairs])
        elif self.kind == KIND_ANGLE:
            if isinstance(self.triples, str):
                d["triples"] = self.triples
                d["anchor"] = self.anchor
            else:
                d["triples"] = [list(t) for t in self.triples]
        elif self.kind == KIND_ORIENT:
            d["orient_rows"] = (self.orient_rows
                                if isinstance(self.orient_rows, str)
                                else [list(t) for t in self.orient_rows])
        if self.kind in (KIND_ANGLE, KIND_ORIENT) and not self.normalized:
            d["normalized"] = False
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], threshold=d.get("threshold"),
                   weight=d.get("weight", 1.0), pairs=d.get("pairs", "all"),
                   triples=d.get("triples", "anchored"),
                   anchor=d.get("anchor", 0),
                   orient_rows=d.get("orient_rows", "pair_endpoints"),
                   normalized=d.get("normalized", True))


@dataclass(frozen=True)
class Row:
    code: int
    robots: tuple
    target: float
    weight: float
    threshold: float
    manifold_index: int
    local_index: int


def _pair_list(spec, n):
    if spec.pairs == "all":
        return list(combinations(range(n), 2))
    if spec.pairs == "chain":
        return [(k, k + 1) for k in range(n - 1)]
    pairs = [tuple(int(v) for v in p) for p in spec.pairs]
    for i, j in pairs:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ConstraintError(f"bad pair ({i}, {j}) for team of {n}")
    return pairs


def _angle_triples(spec, n):
    if spec.triples == "anchored":
        a = spec.anchor
        if not 0 <= a < n:
            raise ConstraintError(f"anchor {a} out of range")
        others = [i for i in range(n) if i != a]
        return [(a, j, k) for j in others for k in others if j != k]
    if spec.triples == "middle":
        out = []
        for j in range(n):
            others = [i for i in range(n) if i != j]
            out.extend((i, j, k) for i, k in combinations(others, 2))
        return out
    if spec.triples == "ordered":
        return [(i, j, k) for i in range(n) for j in range(n)
                for k in range(n) if len({i, j, k}) == 3]
    triples = [tuple(int(v) for v in t) for t in spec.triples]
    for t in triples:
        if len(set(t)) != 3 or not all(0 <= v < n for v in t):
            raise ConstraintError(f"bad triple {t} for team of {n}")
    return triples


def _orient_triples(spec, n, structure):
    if spec.orient_rows == "pair_endpoints":
        out = []
        for i, j in combinations(range(n), 2):
            out.append((i, j, i))
            out.append((i, j, j))
        return out
    if spec.orient_rows == "per_robot":
        return [(k, structure.nearest_contact(k), k) for k in range(n)]
    triples = [tuple(int(v) for v in t) for t in spec.orient_rows]
    for i, j, k in triples:
        if i == j or not all(0 <= v < n for v in (i, j, k)):
            raise ConstraintError(f"bad orient row ({i},{j},{k})")
    return triples


def _expand(spec, mindex, n, structure, dof):
    """Expand one manifold spec into rows (deterministic order)."""
    rows = []

    def add(code, robots, target):
        rows.append(Row(code, tuple(robots), float(target), spec.weight,
                        spec.threshold, mindex, len(rows)))

    if spec.kind == KIND_DISTANCE:
        if n < 2:
            raise ConstraintError("StructureFixedDistance needs n >= 2")
        if structure is None:
            raise ConstraintError("StructureFixedDistance needs a structure")
        for i, j in _pair_list(spec, n):
            add(_R_DIST, (i, j), structure.distance(i, j))
    elif spec.kind == KIND_ANGLE:
        if n < 3:
            raise ConstraintError("StructureFixedAngle needs n >= 3")
        if structure is None:
            raise ConstraintError("StructureFixedAngle needs a structure")
        for i, j, k in _angle_triples(spec, n):
            if structure.is_collinear(i, j, k):
                add(_R_ANGX if spec.normalized else _R_ANGX_RAW,
                    (i, j, k), 0.0)
            elif spec.normalized:
                add(_R_ANGD, (i, j, k), structure.triple_cosine(i, j, k))
            else:
                p = structure.contact_points
                add(_R_ANGD_RAW, (i, j, k),
                    float((p[i] - p[j]) @ (p[j] - p[k])))
    elif spec.kind == KIND_ORIENT:
        if n < 2:
            raise ConstraintError("TaskFixedOrient needs n >= 2")
        if n == 2 and spec.orient_rows in ("pair_endpoints", "per_robot"):
            # single pair vector against both end-effector orientations
            triples = [(0, 1, 0), (0, 1, 1)]
        else:
            if spec.orient_rows == "per_robot" and structure is None:
                raise ConstraintError("per_robot orient rows need a structure")
            triples = _orient_triples(spec, n, structure)
        for t in triples:
            add(_R_ORI if spec.normalized else _R_ORI_RAW, t, 0.0)
    elif spec.kind == KIND_PLANE:
        if n < 2:
            raise ConstraintError("TaskSamePlane needs n >= 2")
        for i, j in _pair_list(spec, n):
            add(_R_PLANE, (i, j), 0.0)
    elif spec.kind == KIND_DIFFDRIVE:
        if dof != ROBOT_DOF_VEL:
            raise ConstraintError(
                "RobotDiffDrive needs velocity DoFs in the configuration")
        for i in range(n):
            add(_R_DDRV, (i,), 0.0)
    return rows


def _cross3(a, b):
    """3-vector cross product without np.cross's stacking overhead."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


class ConstraintSystem:
    """Concatenation of manifold rows into one residual map R^m -> R^l."""

    def __init__(self, model, n, manifolds, structure=None, dof=None):
        self.model = model
        self.n = int(n)
        self.dof = model.dof if dof is None else int(dof)
        self.structure = structure
        self.manifolds = list(manifolds)
        if not self.manifolds:
            raise ConstraintError("manifold list must be nonempty")
        self.rows = []
        for mi, spec in enumerate(self.manifolds):
            self.rows.extend(_expand(spec, mi, self.n, structure, self.dof))
        self.l = len(self.rows)
        self.m = self.n * self.dof
        self.row_map = [(r.manifold_index, r.local_index) for r in self.rows]
        self.thresholds = np.array([r.threshold for r in self.rows])
        self.weights = np.array([r.weight for r in self.rows])
        self._build_index_arrays()
        # forward-kinematics memo keyed on the configuration bytes; the
        # solvers evaluate and differentiate at the same iterate repeatedly
        self._fk_key = None
        self._fk_val = None
        self._jac_cache = {}

    def _build_index_arrays(self):
        self._blocks = {}
        for code in range(_N_ROW_CODES):
            idx = [gi for gi, r in enumerate(self.rows) if r.code == code]
            if not idx:
                continue
            rob = np.array([self.rows[gi].robots for gi in idx], dtype=int)
            tgt = np.array([self.rows[gi].target for gi in idx])
            self._blocks[code] = (np.array(idx, dtype=int), rob, tgt)

    # -- evaluation -------------------------------------------------------

    def _fk_cached(self, q, Q):
        key = q.tobytes()
        if key != self._fk_key:
            self._fk_val = fk_all(self.model, Q)
            self._fk_key = key
        return self._fk_val

    def _jac_cached(self, Q, participants):
        """Per-robot FK Jacobians memoized on each robot's own sub-vector.

        A row update touches only its participants, so the other robots'
        Jacobians stay valid across cyclic sweeps.
        """
        cache = self._jac_cache
        miss = [r for r in participants
                if r not in cache or cache[r][0] != Q[r].tobytes()]
        if miss:
            Jp, Jo = fk_jacobian_all(self.model, Q[miss])
            for t, r in enumerate(miss):
                cache[r] = (Q[r].tobytes(), Jp[t], Jo[t])
        return cache

    def evaluate_unweighted(self, q, fk=None):
        """Raw residual vector in global row order."""
        q = np.asarray(q, float)
        Q = q.reshape(self.n, self.dof)
        if fk is None:
            pos, ori = self._fk_cached(q, Q)
        else:
            pos, ori = fk
        res = np.empty(self.l)
        # degenerate geometry (coincident end effectors) yields NaN rows,
        # which correctly read as unsatisfied; keep numpy quiet about it
        with np.errstate(invalid="ignore", divide="ignore"):
            return self._evaluate_blocks(Q, pos, ori, res)

    def _evaluate_blocks(self, Q, pos, ori, res):
        for code, (idx, rob, tgt) in self._blocks.items():
            if code == _R_DIST:
                d = pos[rob[:, 0]] - pos[rob[:, 1]]
                res[idx] = np.abs(np.sqrt(np.einsum("ij,ij->i", d, d)) - tgt)
            elif code in (_R_ANGD, _R_ANGX, _R_ANGD_RAW, _R_ANGX_RAW):
                a = pos[rob[:, 0]] - pos[rob[:, 1]]
                b = pos[rob[:, 1]] - pos[rob[:, 2]]
                if code in (_R_ANGD, _R_ANGX):
                    a = a / np.sqrt(np.einsum("ij,ij->i", a, a))[:, None]
                    b = b / np.sqrt(np.einsum("ij,ij->i", b, b))[:, None]
                if code in (_R_ANGD, _R_ANGD_RAW):
                    res[idx] = np.einsum("ij,ij->i", a, b) - tgt
                else:
                    # cross product written out; np.cross is slow on
                    # small stacks
                    cx = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
                    cy = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
                    cz = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
                    res[idx] = np.sqrt(cx * cx + cy * cy + cz * cz)
            elif code in (_R_ORI, _R_ORI_RAW):
                d = pos[rob[:, 0]] - pos[rob[:, 1]]
                if code == _R_ORI:
                    d = d / np.sqrt(np.einsum("ij,ij->i", d, d))[:, None]
                res[idx] = np.einsum("ij,ij->i", d, ori[rob[:, 2]])
            elif code == _R_PLANE:
                res[idx] = pos[rob[:, 0], 2] - pos[rob[:, 1], 2]
            elif code == _R_DDRV:
                yaw = Q[rob[:, 0], 3]
                ux = Q[rob[:, 0], 6]
                uy = Q[rob[:, 0], 7]
                res[idx] = ux * np.sin(yaw) - uy * np.cos(yaw)
        return res

    def evaluate(self, q, fk=None):
        """Weighted residual vector (row value times manifold weight)."""
        return self.weights * self.evaluate_unweighted(q, fk=fk)

    def satisfied_mask(self, q):
        return np.abs(self.evaluate(q)) <= self.thresholds

    def is_satisfied(self, q):
        return bool(self.satisfied_mask(q).all())

    def manifold_residuals(self, q):
        """Per-manifold unweighted residual vectors."""
        raw = self.evaluate_unweighted(q)
        out = [[] for _ in self.manifolds]
        for gi, r in enumerate(self.rows):
            out[r.manifold_index].append(raw[gi])
        return [np.array(v) for v in out]

    # -- Jacobians --------------------------------------------------------

    def jacobian_row(self, q, i, jac=None, fk=None):
        """Analytic gradient of weighted row i w.r.t. the flat configuration.

        Returns (gradient (m,), singular flag).  Columns for robots not in
        the row are exactly zero.
        """
        q = np.asarray(q, float)
        row = self.rows[i]
        Q = q.reshape(self.n, self.dof)
        participants = sorted(set(row.robots))
        if fk is None:
            fk = self._fk_cached(q, Q)
        pos, ori = fk
        pmap = {r: r for r in participants}
        if jac is None:
            cache = self._jac_cached(Q, participants)
            JP = {r: cache[r][1] for r in participants}
            JO = {r: cache[r][2] for r in participants}
        else:
            Jp, Jo = jac
            JP = {r: Jp[r] for r in participants}
            JO = {r: Jo[r] for r in participants}

        g = np.zeros(self.m)
        dof = self.dof

        def sl(r):
            return slice(r * dof, (r + 1) * dof)

        singular = False
        if row.code == _R_DIST:
            ri, rj = row.robots
            d = pos[pmap[ri]] - pos[pmap[rj]]
            nd = float(d @ d) ** 0.5
            if nd < _SINGULAR_TOL:
                return g, True
            s = 1.0 if nd - row.target >= 0 else -1.0
            u = s * d / nd
            g[sl(ri)] = u @ JP[ri]
            g[sl(rj)] = -(u @ JP[rj])
        elif row.code in (_R_ANGD, _R_ANGX, _R_ANGD_RAW, _R_ANGX_RAW):
            ri, rj, rk = row.robots
            a = pos[pmap[ri]] - pos[pmap[rj]]
            b = pos[pmap[rj]] - pos[pmap[rk]]
            na, nb = float(a @ a) ** 0.5, float(b @ b) ** 0.5
            if na < _SINGULAR_TOL or nb < _SINGULAR_TOL:
                return g, True
            ah, bh = a / na, b / nb
            if row.code == _R_ANGD:
                dot = ah @ bh
                ga = (bh - dot * ah) / na
                gb = (ah - dot * bh) / nb
            elif row.code == _R_ANGX:
                c = _cross3(ah, bh)
                nc = float(c @ c) ** 0.5
                if nc < _SINGULAR_TOL:
                    return g, True
                u = c / nc
                da = _cross3(bh, u)
                db = _cross3(u, ah)
                ga = (da - (da @ ah) * ah) / na
                gb = (db - (db @ bh) * bh) / nb
            elif row.code == _R_ANGD_RAW:
                ga = b
                gb = a
            else:
                c = _cross3(a, b)
                nc = float(c @ c) ** 0.5
                if nc < _SINGULAR_TOL:
                    return g, True
                u = c / nc
                ga = _cross3(b, u)
                gb = _cross3(u, a)
            g[sl(ri)] += ga @ JP[ri]
            g[sl(rj)] += (gb - ga) @ JP[rj]
            g[sl(rk)] += -(gb @ JP[rk])
        elif row.code in (_R_ORI, _R_ORI_RAW):
            ri, rj, rk = row.robots
            d = pos[pmap[ri]] - pos[pmap[rj]]
            nd = float(d @ d) ** 0.5
            if nd < _SINGULAR_TOL:
                return g, True
            ok = ori[pmap[rk]]
            if row.code == _R_ORI:
                u = d / nd
                gu = (ok - (u @ ok) * u) / nd
                dvec = u
            else:
                gu = ok
                dvec = d
            g[sl(ri)] += gu @ JP[ri]
            g[sl(rj)] += -(gu @ JP[rj])
            g[sl(rk)] += dvec @ JO[rk]
        elif row.code == _R_PLANE:
            ri, rj = row.robots
            g[sl(ri)] = JP[ri][2]
            g[sl(rj)] = -JP[rj][2]
        elif row.code == _R_DDRV:
            (ri,) = row.robots
            yaw, ux, uy = Q[ri, 3], Q[ri, 6], Q[ri, 7]
            base = ri * dof
            g[base + 3] = ux * np.cos(yaw) + uy * np.sin(yaw)
            g[base + 6] = np.sin(yaw)
            g[base + 7] = -np.cos(yaw)
        if row.weight != 1.0:
            g *= row.weight
        return g, singular

    def jacobian_full(self, q):
        """Full (l, m) weighted Jacobian plus a per-row singular mask."""
        q = np.asarray(q, float)
        Q = q.reshape(self.n, self.dof)
        fk = fk_all(self.model, Q)
        jac = fk_jacobian_all(self.model, Q)
        J = np.zeros((self.l, self.m))
        sing = np.zeros(self.l, dtype=bool)
        for i in range(self.l):
            J[i], sing[i] = self.jacobian_row(q, i, jac=jac, fk=fk)
        return J, sing


def assemble_system(model, n, manifolds, structure=None, dof=None):
    """Build the concatenated constraint system for a team of n robots."""
    return ConstraintSystem(model, n, manifolds, structure=structure, dof=dof)


# -- per-manifold convenience evaluators (used heavily by tests) ----------

def _single(model, config, spec, structure=None):
    cs = ConstraintSystem(model, config.n, [spec], structure=structure,
                          dof=config.dof)
    return cs.evaluate_unweighted(config.q)


def eval_m1(model, config, structure, pairs="all"):
    return _single(model, config, ManifoldSpec(KIND_DISTANCE, pairs=pairs),
                   structure)


def eval_m2(model, config, structure, triples="middle", anchor=0):
    return _single(model, config,
                   ManifoldSpec(KIND_ANGLE, triples=triples, anchor=anchor),
                   structure)


def eval_m3(model, config, structure=None, orient_rows="pair_endpoints"):
    return _single(model, config,
                   ManifoldSpec(KIND_ORIENT, orient_rows=orient_rows),
                   structure)


def eval_m4(model, config, pairs="all"):
    return _single(model, config, ManifoldSpec(KIND_PLANE, pairs=pairs))


def eval_m5(model, config):
    return _single(model, config, ManifoldSpec(KIND_DIFFDRIVE))
