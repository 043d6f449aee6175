"""Command-line surface for the toolkit.

Subcommands:
  solve     fit a reduced-space value table from a config, write it as JSON
  simulate  run closed-loop episodes with a chosen planner, write episode CSV
  sweep     evaluate the lambda/horizon/mode grid plus baselines, write CSV
  oracle    run the desk-scale theory checks

Every command is deterministic given (config, seed); the effective config is
serialized into a `.provenance.json` sidecar next to each output, and report
paths render matplotlib figures alongside the delimited output (disable with
--no-plot).  Exit codes: 0 success, 1 usage/config error, 2 solver hit the
iteration cap without converging (output still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import config as cfgmod
from .baselines import CbfController, make_astar_controller, make_nominal_controller
from .config import ConfigError
from .evaluation import (
    sample_instances,
    tradeoff_sweep,
    write_episode_csv,
    write_tradeoff_csv,
    _derived_seed,
)
from .geometry import WorldState
from .oracle import run_all_checks
from .rollout import make_rollout_controller, simulate_episode
from .value_solver import SolverConfig, read_table, solve, write_table


def _write_provenance(out_path: Path, command: str, doc: dict, args) -> None:
    sidecar = out_path.with_suffix(out_path.suffix + ".provenance.json")
    payload = {
        "command": command,
        "config": doc,
        "seed_override": args.seed,
        "threads": getattr(args, "threads", 1),
    }
    sidecar.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _solve_inputs_digest(grid, cost, disturbance, solver_cfg: SolverConfig) -> str:
    payload = {
        "lambda": format(cost.lam, ".17g"),
        "R": format(cost.R, ".17g"),
        "epsilon": format(cost.epsilon, ".17g"),
        "d_edges": [format(x, ".17g") for x in grid.d_edges],
        "e_edges": [format(x, ".17g") for x in grid.e_edges],
        "theta_edges": [format(x, ".17g") for x in grid.theta_edges],
        "outcomes": [[format(o.x, ".17g"), format(o.y, ".17g")] for o in disturbance.outcomes],
        "probabilities": [format(p, ".17g") for p in disturbance.probabilities],
        "samples_per_cell": solver_cfg.samples_per_cell,
        "eps_tol": format(solver_cfg.eps_tol, ".17g"),
        "max_iters": solver_cfg.max_iters,
        "seed": solver_cfg.seed,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def cmd_solve(args) -> int:
    doc = cfgmod.load_document(args.config)
    cost = cfgmod.parse_cost(doc)
    actions = cfgmod.parse_actions(doc)
    disturbance = cfgmod.parse_disturbance(doc)
    grid = cfgmod.parse_grid(doc)
    solver_cfg = cfgmod.parse_solver(doc, seed_override=args.seed)

    table, deltas = solve(grid, cost, actions, disturbance, solver_cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_table(table, out)
    _write_provenance(out, "solve", doc, args)
    for k, d in enumerate(deltas):
        print(f"iter {k}: delta = {d:.10e}")
    converged = deltas[-1] <= solver_cfg.eps_tol
    print(
        f"{'converged' if converged else 'NOT converged'} after {len(deltas)} "
        f"iteration(s); wrote {out} ({table.grid.num_cells} coefficients)"
    )
    if args.plot:
        from .reporting import save_delta_plot

        fig_path = out.with_name(out.stem + "_deltas.png")
        save_delta_plot(deltas, fig_path)
        print(f"wrote {fig_path}")
    return 0 if converged else 2


def _build_controller(name, table, actions, W_eval, box, rollout_cfg, cost, cbf_params):
    if name == "rollout":
        return make_rollout_controller(table, actions, W_eval, box, rollout_cfg)
    if name == "astar":
        return make_astar_controller(actions, box, radius=cost.R)
    if name in ("cbf", "cbf_ce"):
        mode = "certainty_equivalence" if name == "cbf_ce" else "expectation"
        return CbfController(actions, W_eval, cbf_params, mode)
    if name == "nominal":
        return make_nominal_controller(actions)
    raise ConfigError(f"unknown planner {name!r}")


def cmd_simulate(args) -> int:
    doc = cfgmod.load_document(args.config)
    cost = cfgmod.parse_cost(doc)
    actions = cfgmod.parse_actions(doc)
    box = cfgmod.parse_box(doc)
    W_eval = cfgmod.parse_disturbance(doc, key="eval_disturbance")
    rollout_cfg = cfgmod.parse_rollout(doc)
    spec = cfgmod.parse_simulate(doc, seed_override=args.seed)

    table = None
    if spec.planner == "rollout":
        if not args.table:
            raise ConfigError("simulate with the rollout planner needs --table")
        table = read_table(args.table)
        tp = table.cost_params
        if (tp.lam, tp.R, tp.epsilon) != (cost.lam, cost.R, cost.epsilon):
            print(
                "error: value table cost parameters "
                f"(lambda={tp.lam}, R={tp.R}, epsilon={tp.epsilon}) do not match "
                f"config (lambda={cost.lam}, R={cost.R}, epsilon={cost.epsilon})",
                file=sys.stderr,
            )
            return 1

    results = []
    for j in range(spec.realizations):
        controller = _build_controller(
            spec.planner, table, actions, W_eval, box, rollout_cfg, cost, spec.cbf
        )
        episode_seed = _derived_seed(spec.seed, 2, j)
        result = simulate_episode(
            WorldState(h=spec.h0, r=spec.r0),
            spec.t,
            controller,
            W_eval,
            cost,
            box,
            spec.max_steps,
            episode_seed,
        )
        results.append(result)
        status = "timeout" if result.timed_out else f"reached in {result.time_to_target}"
        extra = f", fallbacks={result.fallback_count}" if result.fallback_count else ""
        print(
            f"episode {j}: {status}, min_dist={result.min_distance:.4f}, "
            f"collided={result.collided}{extra}"
        )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_episode_csv(results, [spec.t] * len(results), out)
    _write_provenance(out, "simulate", doc, args)
    n = len(results)
    print(
        f"wrote {out}: {n} episode(s), mean time "
        f"{sum(r.time_to_target for r in results) / n:.3f}, mean min dist "
        f"{sum(r.min_distance for r in results) / n:.4f}"
    )
    if args.plot:
        from .reporting import save_distance_plot, save_trajectory_plot

        traj_path = out.with_name(out.stem + "_trajectory.png")
        dist_path = out.with_name(out.stem + "_distances.png")
        save_trajectory_plot(results[0], spec.t, traj_path)
        save_distance_plot(results[0], spec.t, dist_path)
        print(f"wrote {traj_path}")
        print(f"wrote {dist_path}")
    return 0


def cmd_sweep(args) -> int:
    doc = cfgmod.load_document(args.config)
    cost = cfgmod.parse_cost(doc)
    actions = cfgmod.parse_actions(doc)
    solver_W = cfgmod.parse_disturbance(doc)
    W_eval = cfgmod.parse_disturbance(doc, key="eval_disturbance")
    grid = cfgmod.parse_grid(doc)
    box = cfgmod.parse_box(doc)
    rollout_cfg = cfgmod.parse_rollout(doc)
    eval_spec = cfgmod.parse_evaluation(doc, seed_override=args.seed)
    solver_cfg = cfgmod.parse_solver(doc)
    solve_missing = bool(doc.get("solve_missing", True))
    cache_dir = Path(doc.get("cache_dir", Path(args.out).parent / "table_cache"))

    from .geometry import CostParams

    def table_for_lambda(lam: float):
        params = CostParams(lam=lam, R=cost.R, epsilon=cost.epsilon)
        digest = _solve_inputs_digest(grid, params, solver_W, solver_cfg)
        cache_path = cache_dir / f"table_{digest[:16]}.json"
        if cache_path.exists():
            print(f"lambda={lam:g}: using cached table {cache_path}")
            return read_table(cache_path)
        if not solve_missing:
            raise ConfigError(
                f"no cached table for lambda={lam:g} at {cache_path} and "
                "'solve_missing' is false"
            )
        print(f"lambda={lam:g}: solving...")
        table, deltas = solve(grid, params, actions, solver_W, solver_cfg)
        cache_dir.mkdir(parents=True, exist_ok=True)
        write_table(table, cache_path)
        print(f"lambda={lam:g}: solved in {len(deltas)} iteration(s), cached")
        return table

    instances = sample_instances(
        eval_spec.instances, eval_spec.realizations, box, eval_spec.seed
    )
    points = tradeoff_sweep(
        eval_spec.lambdas,
        eval_spec.horizons,
        eval_spec.modes,
        table_for_lambda,
        instances,
        W_eval,
        actions,
        box,
        rollout_cfg,
        baselines=eval_spec.baselines,
        cost_params=cost,
        max_steps=eval_spec.max_steps,
        threads=args.threads,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tradeoff_csv(points, out)
    _write_provenance(out, "sweep", doc, args)
    for pt in points:
        tag = f"lambda={pt.lam:g} N={pt.horizon}" if pt.planner == "rollout" else pt.mode
        print(
            f"{pt.planner:8s} {tag:28s} mean_time={pt.mean_time:8.3f} "
            f"mean_min_dist={pt.mean_min_distance:7.4f} "
            f"collisions={pt.collision_count} timeouts={pt.timeout_count}"
        )
    print(f"wrote {out} ({len(points)} points)")
    if args.plot:
        from .reporting import save_tradeoff_plot

        fig_path = out.with_name(out.stem + ".png")
        save_tradeoff_plot(points, fig_path)
        print(f"wrote {fig_path}")
    return 0


def cmd_oracle(args) -> int:
    checks = run_all_checks(seed=args.seed if args.seed is not None else 0)
    for check in checks:
        print(check.summary())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        payload = [
            {
                "name": c.name,
                "residual": c.residual,
                "tolerance": c.tolerance,
                "passed": c.passed,
                "details": c.details,
            }
            for c in checks
        ]
        out.write_text(json.dumps(payload, indent=2, default=float) + "\n")
        print(f"wrote {out}")
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symplan",
        description="Symmetry-reduced stochastic shortest-path planning toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker thread cap")
        p.add_argument(
            "--plot",
            dest="plot",
            action="store_true",
            default=True,
            help="render figures next to the output (default)",
        )
        p.add_argument("--no-plot", dest="plot", action="store_false")

    p_solve = sub.add_parser("solve", help="fit a value table")
    common(p_solve)
    p_solve.add_argument("--out", required=True, help="output table JSON path")
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="run closed-loop episodes")
    common(p_sim)
    p_sim.add_argument("--table", default=None, help="value table JSON (rollout planner)")
    p_sim.add_argument("--out", required=True, help="output episode CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="trade-off sweep with baselines")
    common(p_sweep)
    p_sweep.add_argument("--out", required=True, help="output trade-off CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="run the theory verification suite")
    p_oracle.add_argument("--seed", type=int, default=None)
    p_oracle.add_argument("--out", default=None, help="optional JSON report path")
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
