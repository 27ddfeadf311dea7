"""Command-line entry point.

    swarmtraj run --scenario F --out D [--parallel] [--seed S] [--quad-nodes Q] [--replan-hz H]
    swarmtraj predict --p0 0 --p-end 1 [--v0 ..] [--a0 ..]
    swarmtraj plan --problem P.json
    swarmtraj validate --scenario F

Exit codes: 0 success, 1 invalid input or usage, 2 run timed out.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import outputs, planner, predictor, swarm
from .scenario import (
    build_plan_problem,
    load_scenario,
    with_overrides,
)
from .trajectory import RobotState

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TIMEOUT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swarmtraj", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log replanning warnings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate a scenario and write its artifacts")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--parallel", action="store_true", help="replan robots on worker threads")
    run.add_argument("--seed", type=int, help="seed for random_spawn scenarios")
    run.add_argument("--quad-nodes", type=int, help="Gauss-Legendre nodes per interval")
    run.add_argument("--replan-hz", type=float, help="replanning frequency")

    pred = sub.add_parser("predict", help="closed-form prediction for one state and goal")
    pred.add_argument("--p0", type=float, nargs="+", required=True)
    pred.add_argument("--v0", type=float, nargs="+")
    pred.add_argument("--a0", type=float, nargs="+")
    pred.add_argument("--p-end", type=float, nargs="+", required=True)
    pred.add_argument("--t-min", type=float, default=predictor.T_MIN)
    pred.add_argument("--j-nominal", type=float, default=predictor.PredictorSettings.j_nominal)

    plan = sub.add_parser("plan", help="solve one planning instance from a JSON file")
    plan.add_argument("--problem", required=True)

    val = sub.add_parser("validate", help="parse a scenario and report")
    val.add_argument("--scenario", required=True)
    val.add_argument("--seed", type=int)
    return parser


def _trajectory_json(traj) -> dict:
    return {"duration": traj.duration, "coeffs": traj.coeffs.tolist()}


def cmd_predict(args) -> int:
    p0 = np.array(args.p0)
    zeros = np.zeros_like(p0)
    v0 = np.array(args.v0) if args.v0 is not None else zeros
    a0 = np.array(args.a0) if args.a0 is not None else zeros
    p_end = np.array(args.p_end)
    if not (v0.shape == a0.shape == p_end.shape == p0.shape):
        print("error: --p0, --v0, --a0 and --p-end need the same number of values", file=sys.stderr)
        return EXIT_INVALID
    try:
        settings = predictor.PredictorSettings(t_min=args.t_min, j_nominal=args.j_nominal)
        result = predictor.predict(RobotState(p0, v0, a0), p_end, settings)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = {"duration": result.duration, "cost": result.cost, "method": result.method.value,
           "trajectory": _trajectory_json(result.trajectory)}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        with open(args.problem, encoding="utf-8") as fh:
            data = json.load(fh)
        prob = build_plan_problem(data)
        result = planner.plan(prob.state0, prob.goal, prob.obstacles, weights=prob.weights,
                              limits=prob.limits, own_radius=prob.own_radius,
                              settings=prob.settings, predictor_settings=prob.predictor_settings)
    except (OSError, json.JSONDecodeError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    b = result.breakdown
    out = {
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "termination": result.termination,
        "near_contact": result.near_contact,
        "breakdown": {"smoothness": b.smoothness, "collision": b.collision,
                      "limits": b.limits, "time": b.time, "end_penalty": b.end_penalty},
        "trajectory": _trajectory_json(result.trajectory),
    }
    print(json.dumps(outputs.json_safe(out), indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        config = load_scenario(args.scenario, seed=args.seed)
    except (OSError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    goals = sum(len(r.goals) for r in config.robots)
    print(f"ok: {len(config.robots)} robots, {goals} goals, N={config.dimension}, "
          f"replan_hz={config.sim.replan_hz:g}, duration_max={config.sim.duration_max:g}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config = load_scenario(args.scenario, seed=args.seed)
        config = with_overrides(config, quad_nodes=args.quad_nodes, replan_hz=args.replan_hz,
                                parallel=True if args.parallel else None)
    except (OSError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if os.path.exists(args.out) and not os.path.isdir(args.out):
        print(f"invalid: --out {args.out} exists and is not a directory", file=sys.stderr)
        return EXIT_INVALID

    log = swarm.run(config.agents(), config.sim, seed=config.seed)
    summary = swarm.metrics(log)

    os.makedirs(args.out, exist_ok=True)
    outputs.write_trajectory_csv(log, os.path.join(args.out, "trajectory.csv"))
    outputs.write_metrics(summary, os.path.join(args.out, "metrics.json"))
    outputs.emit_plot_data(log, os.path.join(args.out, "plots"))

    sep = summary["min_separation"]
    print(f"makespan={summary['makespan']:.2f}s min_separation="
          f"{'n/a' if not np.isfinite(sep) else f'{sep:.3f}'} "
          f"min_clearance={summary['min_clearance']:.3f} "
          f"replan_mean={summary['replan_wall_mean'] * 1e3:.1f}ms "
          f"timed_out={summary['timed_out']}")
    return EXIT_TIMEOUT if log.timed_out else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "predict": cmd_predict, "plan": cmd_plan,
                "validate": cmd_validate}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
