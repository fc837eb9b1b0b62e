"""Benchmark harness for the projection and planning comparisons.

Two experiment families:

  projection  random composite configurations drawn uniformly inside the
              workspace are projected onto each benchmark manifold set by
              every solver; emits per-trial and per-cell CSVs
  planning    seeded cluttered environments per (scenario, complexity,
              solver) cell, one constrained-RRT plan each; successful paths
              are exported for independent auditing

All trial streams are keyed by (base seed, cell, trial index) so solvers
within a cell see identical start configurations (paired-seed comparisons)
and reruns are bit-identical except for wall-clock fields.
"""

from __future__ import annotations

import csv
import json
import platform
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import KIND_DISTANCE
from .kinematics import wrap_angle
from .planner import PlannerParams, collision_check, joint_limits_ok, path_export, plan
from .scenarios import (COMPLEXITY_BANDS, PROJECTION_SETS, REFERENCE_NAMES,
                        generate_environment, projection_benchmark_scenario,
                        reference_scenario)
from .solvers import METHODS, SolverParams, project

GAMMA_CYCLES = 2000  # iteration budget in full-cycle equivalents

PROJECTION_TRIAL_COLUMNS = (
    "manifold_set", "solver", "threshold", "trial", "status", "converged",
    "steps", "updates", "residual_evals", "wall_time", "residual_norm",
    "max_residual")
PROJECTION_CELL_COLUMNS = (
    "manifold_set", "solver", "threshold", "trials", "successes",
    "success_rate", "time_mean", "time_std", "updates_mean", "updates_std")
PLANNING_TRIAL_COLUMNS = (
    "scenario", "complexity", "solver", "trial", "success", "nodes",
    "iterations", "projections_attempted", "projections_converged",
    "updates_per_projection", "wall_time", "path_nodes", "path_file")
PLANNING_CELL_COLUMNS = (
    "scenario", "complexity", "solver", "trials", "successes",
    "success_rate", "time_mean", "time_std", "updates_per_projection_mean")

_TIMING_FIELDS = {"wall_time", "time_mean", "time_std"}


class BenchError(ValueError):
    pass


@dataclass
class BenchSpec:
    experiment: str = "projection"
    scenario_ids: tuple = ()
    solvers: tuple = METHODS
    trials: int = 200
    base_seed: int = 0
    thresholds: tuple = (None,)      # None = per-manifold defaults
    complexities: tuple = ("low", "medium", "hard")
    output_dir: str = "bench_out"
    jobs: int = 1
    gamma: int = GAMMA_CYCLES
    planner_max_nodes: int = 2000
    # benchmark workspaces span 20 m; the library's conservative default
    # steer step exhausts the node budget long before a full traverse
    planner_steer_step: float = 0.75
    # pose-space sampling keeps extension targets on coherent grasps, which
    # the wide benchmark workspaces need to finish within the node budget
    planner_sample_mode: str = "pose"
    export_paths: bool = True

    def __post_init__(self):
        if self.experiment not in ("projection", "planning"):
            raise BenchError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise BenchError("trials must be >= 1")
        if not self.scenario_ids:
            self.scenario_ids = (tuple(PROJECTION_SETS)
                                 if self.experiment == "projection"
                                 else REFERENCE_NAMES)
        for s in self.solvers:
            if s not in METHODS:
                raise BenchError(f"unknown solver {s!r}")


@dataclass
class BenchResult:
    spec: BenchSpec
    cells: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def trial_rows(self, columns):
        return [[rec[c] for c in columns] for rec in self.trials]

    def cell_rows(self, columns):
        return [[rec[c] for c in columns] for rec in self.cells]


def _machine_metadata():
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _trial_seed(base_seed, cell_key, trial):
    """Deterministic per-trial seed shared by all solvers in the cell."""
    key = zlib.crc32("/".join(str(k) for k in cell_key).encode())
    return np.random.SeedSequence([base_seed, key, trial])


def sample_start(rng, model, n):
    """Uniform composite configuration over workspace position bounds and
    joint limits (the trial start distribution)."""
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    return rng.uniform(lo, hi, (n, model.dof)).ravel()


def _solver_budget(method, csystem, gamma):
    """gamma full-cycle equivalents: row-steps for cyclic methods, full
    iterations for the full-Jacobian baselines."""
    if method in ("cnkz", "nkz"):
        return gamma * csystem.l
    return gamma


def _projection_trial(args):
    set_name, method, threshold, trial, base_seed, gamma = args
    scenario = projection_benchmark_scenario(set_name)
    csystem = scenario.assemble()
    if threshold is not None:
        csystem.thresholds = np.full(csystem.l, float(threshold))
    seed_seq = _trial_seed(base_seed, (set_name, str(threshold)), trial)
    rng = np.random.default_rng(seed_seq)
    q0 = sample_start(rng, scenario.model, scenario.team_size)
    params = SolverParams(
        max_steps=_solver_budget(method, csystem, gamma), method=method,
        global_threshold=None if threshold is None else float(threshold))
    report = project(csystem, q0, params)
    finals = [float(np.max(np.abs(r))) for r in report.final_unweighted]
    return {
        "manifold_set": set_name, "solver": method,
        "threshold": "" if threshold is None else threshold,
        "trial": trial, "status": report.status,
        "converged": int(report.converged), "steps": report.steps_used,
        "updates": report.updates_used,
        "residual_evals": report.residual_evals,
        "wall_time": report.wall_time,
        "residual_norm": report.residual_norm,
        "max_residual": max(finals),
    }


def _aggregate(records, keys, time_field="wall_time",
               updates_field="updates"):
    times = [r[time_field] for r in records if r["converged"]]
    updates = [r[updates_field] for r in records if r["converged"]]
    successes = sum(r["converged"] for r in records)
    out = dict(keys)
    out.update({
        "trials": len(records), "successes": successes,
        "success_rate": 100.0 * successes / len(records),
        "time_mean": float(np.mean(times)) if times else "--",
        "time_std": (float(np.std(times, ddof=1))
                     if len(times) > 1 else ("--" if not times else 0.0)),
        "updates_mean": float(np.mean(updates)) if updates else "--",
        "updates_std": (float(np.std(updates, ddof=1))
                        if len(updates) > 1 else ("--" if not updates
                                                  else 0.0)),
    })
    return out


def _run_trials(worker, arglist, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(worker, arglist, chunksize=4))
    return [worker(a) for a in arglist]


def run_projection_benchmark(spec):
    """Success/time/update grid over (manifold set, solver, threshold)."""
    out = BenchResult(spec=spec, metadata=_machine_metadata())
    for set_name in spec.scenario_ids:
        if set_name not in PROJECTION_SETS:
            raise BenchError(f"unknown manifold set {set_name!r}")
        for threshold in spec.thresholds:
            for method in spec.solvers:
                args = [(set_name, method, threshold, t, spec.base_seed,
                         spec.gamma) for t in range(spec.trials)]
                records = _run_trials(_projection_trial, args, spec.jobs)
                out.trials.extend(records)
                out.cells.append(_aggregate(
                    records, {"manifold_set": set_name, "solver": method,
                              "threshold": ("" if threshold is None
                                            else threshold)}))
    _write_outputs(out, "projection")
    return out


def _planning_trial(args):
    (name, complexity, method, trial, base_seed, max_nodes, steer_step,
     sample_mode, out_dir, export_paths) = args
    scenario = reference_scenario(name)
    seed_seq = _trial_seed(base_seed, (name, complexity), trial)
    seeds = seed_seq.generate_state(2)
    scenario.environment = generate_environment(
        complexity, scenario.workspace_lo, scenario.workspace_hi,
        seed=int(seeds[0]), clear_regions=scenario.clear_regions())
    params = PlannerParams(
        max_nodes=max_nodes, steer_step=steer_step, sample_mode=sample_mode,
        rng_seed=int(seeds[1]),
        projection_solver=SolverParams(method=method, max_steps=4000))
    result = plan(scenario, scenario.start_configuration(),
                  scenario.goal_configuration(), params)
    st = result.stats
    upp = (st.projection_updates / st.projections_attempted
           if st.projections_attempted else 0.0)
    path_file = ""
    if result.success and export_paths:
        path_file = f"path_{name}_{complexity}_{method}_{trial}.json"
        path_export(result, scenario, str(Path(out_dir) / path_file))
    return {
        "scenario": name, "complexity": complexity, "solver": method,
        "trial": trial, "success": int(result.success),
        "nodes": st.nodes, "iterations": st.iterations,
        "projections_attempted": st.projections_attempted,
        "projections_converged": st.projections_converged,
        "updates_per_projection": upp, "wall_time": result.wall_time,
        "path_nodes": len(result.path), "path_file": path_file,
        "converged": int(result.success),  # for the shared aggregator
    }


def run_planning_benchmark(spec):
    """Plan-success grid over (scenario, complexity, solver)."""
    out = BenchResult(spec=spec, metadata=_machine_metadata())
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in spec.scenario_ids:
        for complexity in spec.complexities:
            if complexity not in COMPLEXITY_BANDS:
                raise BenchError(f"unknown complexity {complexity!r}")
            for method in spec.solvers:
                args = [(name, complexity, method, t, spec.base_seed,
                         spec.planner_max_nodes, spec.planner_steer_step,
                         spec.planner_sample_mode,
                         str(out_dir), spec.export_paths)
                        for t in range(spec.trials)]
                records = _run_trials(_planning_trial, args, spec.jobs)
                out.trials.extend(records)
                agg = _aggregate(records, {"scenario": name,
                                           "complexity": complexity,
                                           "solver": method},
                                 updates_field="updates_per_projection")
                agg["updates_per_projection_mean"] = agg.pop("updates_mean")
                agg.pop("updates_std")
                out.cells.append(agg)
    _write_outputs(out, "planning")
    return out


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_outputs(result, kind):
    out_dir = Path(result.spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "projection":
        tcols, ccols = PROJECTION_TRIAL_COLUMNS, PROJECTION_CELL_COLUMNS
    else:
        tcols, ccols = PLANNING_TRIAL_COLUMNS, PLANNING_CELL_COLUMNS
    _write_csv(out_dir / f"{kind}_trials.csv", tcols,
               result.trial_rows(tcols))
    _write_csv(out_dir / f"{kind}_cells.csv", ccols, result.cell_rows(ccols))
    with open(out_dir / f"{kind}_meta.json", "w") as fh:
        json.dump({"metadata": result.metadata,
                   "clutter_bands": COMPLEXITY_BANDS,
                   "spec": {k: (list(v) if isinstance(v, tuple) else v)
                            for k, v in result.spec.__dict__.items()}},
                  fh, indent=2, default=str)
        fh.write("\n")


# -- reporting ------------------------------------------------------------

def _fmt(v):
    if v == "--" or v == "":
        return "--"
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def summarize(result, out_dir=None, residual_figures=True):
    """Markdown grid report plus residual-progression SVG figures."""
    out_dir = Path(out_dir if out_dir is not None else result.spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    if result.cells:
        cols = list(result.cells[0].keys())
        lines.append("| " + " | ".join(cols) + " |")
        lines.append("|" + "---|" * len(cols))
        for cell in result.cells:
            lines.append("| " + " | ".join(_fmt(cell[c]) for c in cols)
                         + " |")
    report = "\n".join(lines) + "\n"
    report_path = out_dir / f"{result.spec.experiment}_report.md"
    report_path.write_text(report)
    if residual_figures and result.spec.experiment == "projection":
        for set_name in result.spec.scenario_ids:
            render_residual_progression(
                set_name, result.spec.solvers,
                out_dir / f"residuals_{set_name}.svg",
                base_seed=result.spec.base_seed, gamma=result.spec.gamma)
    return report


def render_residual_progression(set_name, solvers, out_path, base_seed=0,
                                gamma=GAMMA_CYCLES):
    """Residual-norm-vs-update curves for one representative trial."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scenario = projection_benchmark_scenario(set_name)
    csystem = scenario.assemble()
    rng = np.random.default_rng(
        _trial_seed(base_seed, (set_name, "None"), 0))
    q0 = sample_start(rng, scenario.model, scenario.team_size)
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in solvers:
        params = SolverParams(
            max_steps=_solver_budget(method, csystem, gamma), method=method)
        report = project(csystem, q0, params)
        trace = np.asarray(report.norm_trace)
        ax.semilogy(np.arange(len(trace)), np.maximum(trace, 1e-16),
                    label=f"{method} ({report.status})")
    ax.set_xlabel("update")
    ax.set_ylabel("best residual norm")
    ax.set_title(set_name)
    ax.legend(fontsize=8)
    fig.savefig(out_path, format="svg", bbox_inches="tight")
    plt.close(fig)


# -- independent path audit ----------------------------------------------

def audit_path(scenario, waypoints, tol_slack=1e-9):
    """Re-verify each waypoint: thresholds, joint limits, collision.

    Returns a list of violation strings (empty when the path is clean).
    """
    csystem = scenario.assemble()
    violations = []
    for k, q in enumerate(waypoints):
        res = np.abs(csystem.evaluate(q))
        if np.any(res > csystem.thresholds + tol_slack):
            worst = int(np.argmax(res - csystem.thresholds))
            violations.append(
                f"node {k}: residual row {worst} = {res[worst]:.3e}")
        if not joint_limits_ok(scenario.model, q, scenario.team_size):
            violations.append(f"node {k}: joint limits")
        hit, pair = collision_check(scenario, q)
        if hit:
            violations.append(f"node {k}: collision {pair}")
    return violations


def audit_exported_paths(out_dir):
    """Audit every exported path file in a planning benchmark directory.

    Returns (paths audited, list of violations)."""
    from .planner import path_import

    out_dir = Path(out_dir)
    audited = 0
    violations = []
    trials_csv = out_dir / "planning_trials.csv"
    if not trials_csv.exists():
        raise BenchError(f"no planning_trials.csv under {out_dir}")
    meta_path = out_dir / "planning_meta.json"
    base_seed = 0
    if meta_path.exists():
        with open(meta_path) as fh:
            base_seed = json.load(fh)["spec"].get("base_seed", 0)
    with open(trials_csv) as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        if not row["path_file"]:
            continue
        waypoints, doc = path_import(out_dir / row["path_file"])
        scenario = reference_scenario(row["scenario"])
        seed_seq = _trial_seed(base_seed,
                               (row["scenario"], row["complexity"]),
                               int(row["trial"]))
        # environment seed derivation matches _planning_trial
        seeds = seed_seq.generate_state(2)
        scenario.environment = generate_environment(
            row["complexity"], scenario.workspace_lo, scenario.workspace_hi,
            seed=int(seeds[0]), clear_regions=scenario.clear_regions())
        audited += 1
        for v in audit_path(scenario, waypoints):
            violations.append(f"{row['path_file']}: {v}")
    return audited, violations
