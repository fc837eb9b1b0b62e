"""Command-line interface.

Subcommands: project, plan, bench, gen-env, render.  Outputs default to
the directory named by the KACZPLAN_OUT environment variable (falling back
to the current directory).

Exit codes:
  0  success (projection converged / plan found / benchmark completed)
  2  usage or input error
  3  budget exhausted (projection or planner node budget)
  4  singular stall (no usable constraint gradients)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .planner import PlannerParams, PlannerError, path_export, path_import, plan, render_path_svg
from .scenarios import (REFERENCE_NAMES, PROJECTION_SETS, Environment,
                        ScenarioError, generate_environment, load_scenario,
                        projection_benchmark_scenario, reference_scenario)
from .solvers import (METHODS, STATUS_BUDGET, STATUS_STALL, SolverParams,
                      project, residual_trace_export)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_STALL = 4

_STATUS_EXIT = {STATUS_BUDGET: EXIT_BUDGET, STATUS_STALL: EXIT_STALL}


def _out_dir(args):
    base = args.output_dir or os.environ.get("KACZPLAN_OUT", ".")
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_any_scenario(args):
    """Resolve --scenario (file), --reference (bundled), or --set (bench)."""
    picked = [v for v in (args.scenario, getattr(args, "reference", None),
                          getattr(args, "manifold_set", None)) if v]
    if len(picked) != 1:
        raise ScenarioError(
            "choose exactly one of --scenario / --reference / --set")
    if args.scenario:
        return load_scenario(args.scenario)
    if getattr(args, "reference", None):
        return reference_scenario(args.reference)
    return projection_benchmark_scenario(args.manifold_set)


def cmd_project(args):
    scenario = _load_any_scenario(args)
    csystem = scenario.assemble()
    if args.start == "random":
        rng = np.random.default_rng(args.seed)
        q0 = bench_mod.sample_start(rng, scenario.model, scenario.team_size)
    elif args.start == "start-pose":
        q0 = scenario.start_configuration().q
    else:
        q0 = np.asarray(json.loads(Path(args.start).read_text()), float)
    params = SolverParams(max_steps=args.max_steps, method=args.method,
                          global_threshold=args.threshold,
                          rng_seed=args.seed, track_trace=bool(args.trace))
    report = project(csystem, q0, params)
    out = _out_dir(args)
    doc = {
        "status": report.status, "steps": report.steps_used,
        "updates": report.updates_used,
        "residual_evals": report.residual_evals,
        "residual_norm": report.residual_norm,
        "wall_time": report.wall_time,
        "max_residuals": [float(np.max(np.abs(r)))
                          for r in report.final_unweighted],
        "q": [float(v) for v in report.q],
    }
    report_path = out / args.report_name
    report_path.write_text(json.dumps(doc, indent=2) + "\n")
    if args.trace:
        residual_trace_export(report, out / args.trace)
    print(f"{report.status}: updates={report.updates_used} "
          f"norm={report.residual_norm:.3e} -> {report_path}")
    return _STATUS_EXIT.get(report.status, EXIT_OK)


def cmd_plan(args):
    scenario = _load_any_scenario(args)
    if args.environment:
        with open(args.environment) as fh:
            scenario.environment = Environment.from_dict(json.load(fh))
    params = PlannerParams(
        max_nodes=args.max_nodes, steer_step=args.steer_step,
        sample_mode=args.sample_mode,
        goal_bias=args.goal_bias, goal_tolerance=args.goal_tolerance,
        rng_seed=args.seed,
        projection_solver=SolverParams(method=args.method,
                                       max_steps=args.max_steps))
    result = plan(scenario, scenario.start_configuration(),
                  scenario.goal_configuration(), params)
    out = _out_dir(args)
    if not result.success:
        print(f"plan failed: nodes={result.stats.nodes} "
              f"iterations={result.stats.iterations}")
        return EXIT_BUDGET
    path_file = out / args.path_name
    svg_file = (out / args.svg) if args.svg else None
    path_export(result, scenario, str(path_file),
                str(svg_file) if svg_file else None)
    print(f"plan ok: {len(result.path)} waypoints, "
          f"{result.stats.nodes} nodes -> {path_file}")
    return EXIT_OK


def cmd_bench(args):
    thresholds = (tuple(args.thresholds) if args.thresholds else (None,))
    spec = bench_mod.BenchSpec(
        experiment=args.experiment,
        scenario_ids=tuple(args.cells) if args.cells else (),
        solvers=tuple(args.solvers), trials=args.trials,
        base_seed=args.seed, thresholds=thresholds,
        complexities=tuple(args.complexities),
        output_dir=str(_out_dir(args)), jobs=args.jobs,
        planner_max_nodes=args.max_nodes)
    if args.experiment == "projection":
        result = bench_mod.run_projection_benchmark(spec)
    else:
        result = bench_mod.run_planning_benchmark(spec)
    report = bench_mod.summarize(result)
    print(report)
    return EXIT_OK


def cmd_gen_env(args):
    clear = ()
    if args.reference:
        scenario = reference_scenario(args.reference)
        clear = scenario.clear_regions()
        lo, hi = scenario.workspace_lo, scenario.workspace_hi
    else:
        lo = np.array([-10.0, -10.0, 0.0])
        hi = np.array([10.0, 10.0, 20.0])
    env = generate_environment(args.complexity, lo, hi, args.seed,
                               clear_regions=clear)
    out = _out_dir(args) / args.env_name
    out.write_text(json.dumps(env.to_dict(), indent=2) + "\n")
    print(f"{env.complexity_class} environment, "
          f"clutter {env.clutter_ratio:.3f}, "
          f"{len(env.obstacles_lo)} boxes -> {out}")
    return EXIT_OK


def cmd_render(args):
    waypoints, doc = path_import(args.path)
    if args.scenario:
        scenario = load_scenario(args.scenario)
    elif doc["scenario"] in REFERENCE_NAMES:
        scenario = reference_scenario(doc["scenario"])
    else:
        raise ScenarioError(
            "path file references a non-bundled scenario; pass --scenario")
    out = _out_dir(args) / args.svg
    render_path_svg(scenario, waypoints, out)
    print(f"rendered {len(waypoints)} waypoints -> {out}")
    return EXIT_OK


def _add_scenario_flags(p, with_set=True):
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--reference", choices=REFERENCE_NAMES,
                   help="bundled reference scenario")
    if with_set:
        p.add_argument("--set", dest="manifold_set",
                       choices=sorted(PROJECTION_SETS),
                       help="projection benchmark manifold set")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="kaczplan",
        description="Constraint-manifold projection and constrained RRT "
                    "planning for cooperative multi-robot transport.")
    ap.add_argument("--output-dir", "-o", default=None,
                    help="output directory (default: $KACZPLAN_OUT or .)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project one configuration")
    _add_scenario_flags(p)
    p.add_argument("--method", choices=METHODS, default="cnkz")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="random",
                   help="'random', 'start-pose', or a JSON vector file")
    p.add_argument("--max-steps", type=int, default=20000)
    p.add_argument("--threshold", type=float, default=None,
                   help="global residual threshold override")
    p.add_argument("--trace", default=None,
                   help="also write per-step residual trace CSV")
    p.add_argument("--report-name", default="projection_report.json")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("plan", help="run the constrained RRT planner")
    _add_scenario_flags(p, with_set=False)
    p.add_argument("--environment", help="environment JSON from gen-env")
    p.add_argument("--method", choices=METHODS, default="cnkz")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-nodes", type=int, default=5000)
    p.add_argument("--max-steps", type=int, default=4000,
                   help="projection budget per steering step")
    p.add_argument("--steer-step", type=float, default=0.75)
    p.add_argument("--sample-mode", choices=("joint", "pose"),
                   default="pose",
                   help="draw targets in joint space or as structure poses")
    p.add_argument("--goal-bias", type=float, default=0.1)
    p.add_argument("--goal-tolerance", type=float, default=0.2)
    p.add_argument("--path-name", default="path.json")
    p.add_argument("--svg", default=None, help="also render SVG")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run a benchmark grid")
    p.add_argument("--experiment", choices=("projection", "planning"),
                   default="projection")
    p.add_argument("--cells", nargs="*", default=None,
                   help="manifold sets or reference scenario names")
    p.add_argument("--solvers", nargs="*", choices=METHODS, default=METHODS)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", nargs="*", type=float, default=None,
                   help="threshold sweep values (default: per-manifold)")
    p.add_argument("--complexities", nargs="*",
                   default=("low", "medium", "hard"))
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent trial processes")
    p.add_argument("--max-nodes", type=int, default=2000,
                   help="planner node budget per planning trial")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-env", help="generate a cluttered environment")
    p.add_argument("--complexity", choices=("low", "medium", "hard"),
                   default="low")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", choices=REFERENCE_NAMES, default=None,
                   help="keep this scenario's start/goal regions clear")
    p.add_argument("--env-name", default="environment.json")
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("render", help="render an exported path to SVG")
    p.add_argument("--path", required=True)
    p.add_argument("--scenario", help="scenario JSON if not bundled")
    p.add_argument("--svg", default="path.svg")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, PlannerError, bench_mod.BenchError, ValueError,
            OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
