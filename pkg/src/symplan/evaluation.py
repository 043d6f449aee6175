"""Monte-Carlo evaluation: instance sampling, per-lambda episode batches,
trade-off sweeps against the baselines, and CSV emission.

Common random numbers throughout: every planner and every lambda in a sweep
replays the same per-(instance, realization) disturbance stream, so points
on the trade-off curve differ only through the controller.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .action_models import ActionSet, DisturbanceModel
from .baselines import (
    CbfController,
    CbfParams,
    make_astar_controller,
)
from .geometry import CostParams, Vec2, WorldState
from .rollout import (
    MODE_CE,
    ConstraintBox,
    Controller,
    EpisodeResult,
    RolloutConfig,
    make_rollout_controller,
    simulate_episode,
)
from .value_solver import ValueTable


@dataclass(frozen=True)
class InstanceSpec:
    """One random problem instance plus its realization seeds."""

    t: Vec2
    r0: Vec2
    h0: Vec2
    realization_seeds: tuple[int, ...]


@dataclass(frozen=True)
class TradeOffPoint:
    """Aggregated episode metrics for one planner configuration."""

    lam: float | None
    horizon: int | None
    mode: str
    planner: str
    alpha: float | None
    d0: float | None
    mean_time: float
    mean_min_distance: float
    episode_count: int
    collision_count: int
    timeout_count: int


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])


def sample_instances(
    count: int,
    realizations_per_instance: int,
    box: ConstraintBox,
    seed: int,
) -> list[InstanceSpec]:
    """Draw instances uniformly over the box, rejecting until the separation
    constraints |r0 - t| > 1 and |h0 - r0| > 1 hold."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0))))
    lo = np.array([box.lo.x, box.lo.y])
    hi = np.array([box.hi.x, box.hi.y])
    out = []
    for i in range(count):
        while True:
            t, r0, h0 = lo + rng.random((3, 2)) * (hi - lo)
            if math.hypot(*(r0 - t)) > 1.0 and math.hypot(*(h0 - r0)) > 1.0:
                break
        seeds = tuple(
            _derived_seed(seed, 1, i, j) for j in range(realizations_per_instance)
        )
        out.append(
            InstanceSpec(
                t=Vec2(*map(float, t)),
                r0=Vec2(*map(float, r0)),
                h0=Vec2(*map(float, h0)),
                realization_seeds=seeds,
            )
        )
    return out


def run_episodes(
    controller_factory: Callable[[], Controller],
    instances: Sequence[InstanceSpec],
    W_eval: DisturbanceModel,
    p: CostParams,
    box: ConstraintBox,
    max_steps: int = 500,
    threads: int = 1,
) -> list[EpisodeResult]:
    """Run every (instance, realization) episode.

    Episodes are independent and seeded individually, so the result list is
    identical for any thread count; aggregation order is by job index.
    """
    jobs = [
        (inst, seed)
        for inst in instances
        for seed in inst.realization_seeds
    ]

    def run_one(job) -> EpisodeResult:
        inst, seed = job
        return simulate_episode(
            WorldState(h=inst.h0, r=inst.r0),
            inst.t,
            controller_factory(),
            W_eval,
            p,
            box,
            max_steps,
            seed,
        )

    if threads <= 1:
        return [run_one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_one, jobs))


def _aggregate(
    results: Sequence[EpisodeResult],
    *,
    lam: float | None,
    horizon: int | None,
    mode: str,
    planner: str,
    alpha: float | None = None,
    d0: float | None = None,
) -> TradeOffPoint:
    n = len(results)
    return TradeOffPoint(
        lam=lam,
        horizon=horizon,
        mode=mode,
        planner=planner,
        alpha=alpha,
        d0=d0,
        mean_time=sum(r.time_to_target for r in results) / n,
        mean_min_distance=sum(r.min_distance for r in results) / n,
        episode_count=n,
        collision_count=sum(r.collided for r in results),
        timeout_count=sum(r.timed_out for r in results),
    )


def evaluate_lambda(
    lam: float,
    table: ValueTable,
    rollout_cfg: RolloutConfig,
    instances: Sequence[InstanceSpec],
    W_eval: DisturbanceModel,
    U: ActionSet,
    box: ConstraintBox,
    max_steps: int = 500,
    threads: int = 1,
) -> TradeOffPoint:
    """One trade-off point: the rollout planner on ``table`` over all
    (instance, realization) episodes."""
    if table.cost_params.lam != lam:
        raise ValueError(
            f"table was solved with lambda={table.cost_params.lam}, not {lam}"
        )
    results = run_episodes(
        lambda: make_rollout_controller(table, U, W_eval, box, rollout_cfg),
        instances,
        W_eval,
        table.cost_params,
        box,
        max_steps=max_steps,
        threads=threads,
    )
    return _aggregate(
        results,
        lam=lam,
        horizon=rollout_cfg.horizon,
        mode=rollout_cfg.mode,
        planner="rollout",
    )


def evaluate_baseline(
    controller: str,
    params: CbfParams | None,
    instances: Sequence[InstanceSpec],
    W_eval: DisturbanceModel,
    U: ActionSet,
    cost_params: CostParams,
    box: ConstraintBox,
    max_steps: int = 500,
    threads: int = 1,
) -> TradeOffPoint:
    """Episode batch for one baseline controller ('astar', 'cbf', 'cbf_ce')."""
    if controller == "astar":
        factory = lambda: make_astar_controller(U, box, radius=cost_params.R)
        alpha = d0 = None
        mode = "astar"
    elif controller in ("cbf", "cbf_ce"):
        if params is None:
            raise ValueError("cbf baselines need CbfParams")
        cbf_mode = MODE_CE if controller == "cbf_ce" else "expectation"
        factory = lambda: CbfController(U, W_eval, params, cbf_mode)
        alpha, d0 = params.alpha, params.d0
        mode = controller
    else:
        raise ValueError(f"unknown baseline controller {controller!r}")
    results = run_episodes(
        factory, instances, W_eval, cost_params, box, max_steps=max_steps, threads=threads
    )
    return _aggregate(
        results,
        lam=None,
        horizon=None,
        mode=mode,
        planner=controller,
        alpha=alpha,
        d0=d0,
    )


def tradeoff_sweep(
    lambdas: Sequence[float],
    horizons: Sequence[int],
    modes: Sequence[str],
    table_for_lambda: Callable[[float], ValueTable],
    instances: Sequence[InstanceSpec],
    W_eval: DisturbanceModel,
    U: ActionSet,
    box: ConstraintBox,
    rollout_base: RolloutConfig,
    baselines: Sequence[tuple[str, CbfParams | None]] = (),
    cost_params: CostParams | None = None,
    max_steps: int = 500,
    threads: int = 1,
) -> list[TradeOffPoint]:
    """Cartesian (lambda, horizon, mode) evaluation on a shared instance set,
    plus one point per requested baseline.  Rollout points come out sorted
    by lambda, then horizon, then mode."""
    points = []
    for lam in sorted(lambdas):
        table = table_for_lambda(lam)
        for horizon in horizons:
            for mode in modes:
                cfg = RolloutConfig(
                    horizon=horizon,
                    mode=mode,
                    scenario_count=rollout_base.scenario_count,
                    infeasibility_penalty=rollout_base.infeasibility_penalty,
                    seed=rollout_base.seed,
                )
                points.append(
                    evaluate_lambda(
                        lam, table, cfg, instances, W_eval, U, box,
                        max_steps=max_steps, threads=threads,
                    )
                )
    for name, prm in baselines:
        if cost_params is None:
            raise ValueError("baseline evaluation needs cost_params")
        points.append(
            evaluate_baseline(
                name, prm, instances, W_eval, U, cost_params, box,
                max_steps=max_steps, threads=threads,
            )
        )
    return points


# ---------------------------------------------------------------------------
# CSV emission (floats at 17 significant digits, empty string for N/A).
# ---------------------------------------------------------------------------

EPISODE_CSV_COLUMNS = (
    "episode_id,step,r_x,r_y,h_x,h_y,u_x,u_y,w_x,w_y,dist_to_target,dist_to_obstacle"
)
TRADEOFF_CSV_COLUMNS = (
    "lambda,horizon,mode,planner,alpha,d0,mean_time,mean_min_distance,"
    "episodes,collisions,timeouts"
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def episode_rows(episode_id: int, result: EpisodeResult, t: Vec2):
    for step in result.trajectory:
        yield (
            episode_id,
            step.step,
            step.r.x,
            step.r.y,
            step.h.x,
            step.h.y,
            step.u.x,
            step.u.y,
            step.w.x,
            step.w.y,
            (step.r - t).norm(),
            (step.h - step.r).norm(),
        )


def write_episode_csv(
    results: Sequence[EpisodeResult], targets: Sequence[Vec2], path
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(EPISODE_CSV_COLUMNS + "\n")
        for episode_id, (result, t) in enumerate(zip(results, targets)):
            for row in episode_rows(episode_id, result, t):
                f.write(",".join(_fmt(v) for v in row) + "\n")


def write_tradeoff_csv(points: Sequence[TradeOffPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(TRADEOFF_CSV_COLUMNS + "\n")
        for pt in points:
            row = (
                pt.lam,
                pt.horizon,
                pt.mode,
                pt.planner,
                pt.alpha,
                pt.d0,
                pt.mean_time,
                pt.mean_min_distance,
                pt.episode_count,
                pt.collision_count,
                pt.timeout_count,
            )
            f.write(
                ",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n"
            )
