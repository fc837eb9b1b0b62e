"""Projection solvers over a ConstraintSystem.

Four methods behind one interface:

  cnkz  cyclic single-row hyperplane projection with per-manifold residual
        thresholds; satisfied rows are skipped
  nkz   the same cyclic loop with one global threshold and no row skipping
  nr    damped Newton-Raphson on the full system via the Moore-Penrose
        pseudo-inverse
  cim   simultaneous (Cimmino-style) averaging of the single-row update
        vectors computed from a common base point

The cyclic methods recompute the full residual after every row update, so
the row-skip test always reflects the current iterate; the best iterate seen
so far (by full residual norm) is tracked separately and returned when the
budget runs out.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

STATUS_CONVERGED = "Converged"
STATUS_BUDGET = "BudgetExhausted"
STATUS_STALL = "SingularStall"

METHODS = ("cnkz", "nkz", "nr", "cim")

_GRAD_TOL = 1e-12
_DIVERGE_NORM = 1e6


@dataclass
class SolverParams:
    max_steps: int = 2000
    method: str = "cnkz"
    global_threshold: float | None = None
    nr_step_scale: float = 1.0
    nr_jacobian: str = "numeric"
    cim_relaxation: float = 1.0
    rng_seed: int = 0
    randomized_order: bool = False
    track_trace: bool = False

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.nr_jacobian not in ("numeric", "analytic"):
            raise ValueError("nr_jacobian must be 'numeric' or 'analytic'")
        if not 0.0 < self.nr_step_scale <= 1.0:
            raise ValueError("nr_step_scale must be in (0, 1]")
        if not 0.0 < self.cim_relaxation < 2.0:
            raise ValueError("cim_relaxation must be in (0, 2)")

    def resolved_threshold(self, csystem):
        if self.global_threshold is not None:
            return self.global_threshold
        return float(np.min(csystem.thresholds))


@dataclass
class TraceRecord:
    step: int
    row: int
    manifold: int
    unweighted_residual: float
    weighted_residual: float
    norm: float
    accepted: bool


@dataclass
class ProjectionReport:
    status: str
    q: np.ndarray                 # best-so-far configuration
    steps_used: int
    updates_used: int
    residual_evals: int
    wall_time: float
    residual_norm: float          # at q
    norm_trace: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    final_unweighted: list = field(default_factory=list)
    diverged: bool = False

    @property
    def converged(self):
        return self.status == STATUS_CONVERGED


def kaczmarz_update(value, gradient):
    """Hyperplane-projection step for one scalar residual row.

    Returns the configuration increment dq with value + gradient . dq == 0
    (to rounding) for gradient norms above the singularity cutoff, else None.
    """
    g2 = float(gradient @ gradient)
    if g2 < _GRAD_TOL ** 2 or not np.isfinite(g2):
        return None
    return (-value / g2) * gradient


def _finish(csystem, status, q, steps, updates, evals, t0, norm_trace,
            trace, diverged=False):
    report = ProjectionReport(
        status=status, q=q.copy(), steps_used=steps, updates_used=updates,
        residual_evals=evals, wall_time=time.perf_counter() - t0,
        residual_norm=float(np.linalg.norm(csystem.evaluate(q))),
        norm_trace=norm_trace, trace=trace, diverged=diverged,
        final_unweighted=csystem.manifold_residuals(q))
    return report


def _cyclic(csystem, q0, params, per_row_thresholds):
    """Shared loop for cnkz (per-row thresholds) and nkz (global, no skip)."""
    t0 = time.perf_counter()
    l = csystem.l
    if per_row_thresholds:
        eps = csystem.thresholds
        skip_satisfied = True
    else:
        eps = np.full(l, params.resolved_threshold(csystem))
        skip_satisfied = False

    rng = np.random.default_rng(params.rng_seed)
    order = np.arange(l)

    q = np.array(q0, float, copy=True)
    F = csystem.evaluate(q)
    evals = 1
    r = -F
    status = np.abs(r) <= eps
    r_norm = float(r @ r) ** 0.5
    best_q = q.copy()
    best_norm = r_norm
    norm_trace = [r_norm]
    trace = []
    steps = 0
    updates = 0
    # stall detection: a full cycle with no update where every visited
    # unsatisfied row had a singular gradient
    no_update_streak = 0
    singular_in_streak = False

    while not status.all() and steps < params.max_steps:
        pos_in_cycle = steps % l
        if params.randomized_order and pos_in_cycle == 0:
            rng.shuffle(order)
        i = int(order[pos_in_cycle])
        accepted = False
        if skip_satisfied and status[i]:
            no_update_streak += 1
        else:
            g, singular = csystem.jacobian_row(q, i)
            dq = None if singular else kaczmarz_update(-r[i], g)
            if dq is None:
                no_update_streak += 1
                singular_in_streak = True
            else:
                no_update_streak = 0
                singular_in_streak = False
                q = q + dq
                updates += 1
                F_new = csystem.evaluate(q)
                evals += 1
                # working residual always tracks the current iterate; the
                # best configuration seen is kept separately by full norm
                r = -F_new
                status = np.abs(r) <= eps
                new_norm = float(r @ r) ** 0.5
                if new_norm < best_norm:
                    best_norm = new_norm
                    best_q = q.copy()
                    accepted = True
                r_norm = new_norm
                norm_trace.append(best_norm)
        if params.track_trace:
            row = csystem.rows[i]
            trace.append(TraceRecord(steps, i, row.manifold_index,
                                     float(-r[i] / row.weight),
                                     float(-r[i]), r_norm, accepted))
        steps += 1
        if no_update_streak >= l and singular_in_streak:
            return _finish(csystem, STATUS_STALL, best_q, steps,
                           updates, evals, t0, norm_trace, trace)

    if status.all():
        # the converged iterate is the projection even if an earlier
        # iterate had a marginally smaller norm
        return _finish(csystem, STATUS_CONVERGED, q, steps, updates, evals,
                       t0, norm_trace, trace)
    return _finish(csystem, STATUS_BUDGET, best_q, steps, updates, evals, t0,
                   norm_trace, trace)


def project_cnkz(csystem, q0, params=None):
    params = params or SolverParams(method="cnkz")
    return _cyclic(csystem, q0, params, per_row_thresholds=True)


def project_nkz(csystem, q0, params=None):
    params = params or SolverParams(method="nkz")
    return _cyclic(csystem, q0, params, per_row_thresholds=False)


_FD_STEP = 1e-6


def numeric_jacobian(csystem, q, step=_FD_STEP):
    """Central-difference estimate of the full weighted Jacobian."""
    q = np.asarray(q, float)
    J = np.empty((csystem.l, csystem.m))
    for k in range(csystem.m):
        dq = np.zeros(csystem.m)
        dq[k] = step
        J[:, k] = (csystem.evaluate(q + dq)
                   - csystem.evaluate(q - dq)) / (2.0 * step)
    return J


def project_nr(csystem, q0, params=None):
    """Damped Newton-Raphson with a pseudo-inverse of the full Jacobian.

    The Jacobian is estimated by central differences by default, which is
    how this baseline is normally implemented in practice.  On systems with
    linearly dependent rows the difference noise keeps the small singular
    values just above the pseudo-inverse cutoff, so the Newton step inverts
    them and the iteration oscillates or blows up; the exact analytic
    Jacobian (nr_jacobian="analytic") truncates them cleanly instead.
    """
    params = params or SolverParams(method="nr")
    t0 = time.perf_counter()
    eps = params.resolved_threshold(csystem)
    q = np.array(q0, float, copy=True)
    F = csystem.evaluate(q)
    evals = 1
    norm = float(np.linalg.norm(F))
    best_q, best_norm = q.copy(), norm
    norm_trace = [norm]
    steps = 0
    diverged = False
    while np.max(np.abs(F)) > eps and steps < params.max_steps:
        if params.nr_jacobian == "numeric":
            J = numeric_jacobian(csystem, q)
            evals += 2 * csystem.m
        else:
            J, _ = csystem.jacobian_full(q)
        dq = -params.nr_step_scale * (np.linalg.pinv(J, rcond=1e-10) @ F)
        if not np.all(np.isfinite(dq)):
            break
        q = q + dq
        F = csystem.evaluate(q)
        evals += 1
        norm = float(np.linalg.norm(F))
        norm_trace.append(min(best_norm, norm))
        if norm < best_norm:
            best_q, best_norm = q.copy(), norm
        steps += 1
        if norm > _DIVERGE_NORM:
            diverged = True
            break
    ok = np.max(np.abs(csystem.evaluate(best_q))) <= eps
    status_name = STATUS_CONVERGED if ok else STATUS_BUDGET
    return _finish(csystem, status_name, best_q, steps, steps, evals, t0,
                   norm_trace, [], diverged=diverged)


def project_cim(csystem, q0, params=None):
    """Simultaneous row actions: relaxation-weighted average of the
    single-row update vectors of every unsatisfied row, all computed from
    the same base point.  Satisfied rows contribute nothing but stay in the
    averaging denominator (the classical simultaneous-projection operator),
    so steps shrink as more rows are met."""
    params = params or SolverParams(method="cim")
    t0 = time.perf_counter()
    eps = params.resolved_threshold(csystem)
    q = np.array(q0, float, copy=True)
    F = csystem.evaluate(q)
    evals = 1
    norm = float(np.linalg.norm(F))
    best_q, best_norm = q.copy(), norm
    norm_trace = [norm]
    steps = 0
    stalled = False
    while np.max(np.abs(F)) > eps and steps < params.max_steps:
        J, sing = csystem.jacobian_full(q)
        unsat = np.abs(F) > eps
        usable = unsat & ~sing
        g2 = np.einsum("ij,ij->i", J, J)
        usable &= g2 > _GRAD_TOL ** 2
        if not usable.any():
            stalled = True
            break
        scale = np.zeros(csystem.l)
        scale[usable] = -F[usable] / g2[usable]
        dq = params.cim_relaxation * (scale[usable] @ J[usable]) / csystem.l
        q = q + dq
        F = csystem.evaluate(q)
        evals += 1
        norm = float(np.linalg.norm(F))
        norm_trace.append(min(best_norm, norm))
        if norm < best_norm:
            best_q, best_norm = q.copy(), norm
        steps += 1
    if np.max(np.abs(csystem.evaluate(best_q))) <= eps:
        status_name = STATUS_CONVERGED
    elif stalled:
        status_name = STATUS_STALL
    else:
        status_name = STATUS_BUDGET
    return _finish(csystem, status_name, best_q, steps, steps, evals, t0,
                   norm_trace, [])


_DISPATCH = {"cnkz": project_cnkz, "nkz": project_nkz,
             "nr": project_nr, "cim": project_cim}


def project(csystem, q0, params=None):
    params = params or SolverParams()
    return _DISPATCH[params.method](csystem, q0, params)


TRACE_COLUMNS = ("step", "row", "manifold", "unweighted_residual",
                 "weighted_residual", "norm", "accepted")


def residual_trace_export(report, path):
    """Write the per-step trace as CSV (requires track_trace=True)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t in report.trace:
            w.writerow([t.step, t.row, t.manifold,
                        repr(t.unweighted_residual),
                        repr(t.weighted_residual), repr(t.norm),
                        int(t.accepted)])
