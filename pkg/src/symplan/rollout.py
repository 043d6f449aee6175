"""N-step lookahead rollout with the solved value function as terminal penalty.

At each decision the planner searches every open-loop action sequence of
length N, scores it by accumulated stage costs plus the terminal table value,
and applies only the first action (receding horizon).  Two evaluation modes:

- ``expectation``: the score is averaged over M disturbance scenario
  sequences drawn once per call (common random numbers, so every candidate
  sequence is compared against the same scenarios).
- ``certainty_equivalence``: the disturbance is replaced by its mean, giving
  a single deterministic scenario.

Box constraints on the robot are soft (each violating lookahead step adds a
large penalty); the obstacle is uncontrolled, so inside the lookahead and in
simulation its position is simply clamped into the box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .action_models import ActionSet, DisturbanceModel, mean_disturbance
from .geometry import (
    CostParams,
    Vec2,
    WorldState,
    reduce_arrays,
)
from .value_solver import ValueTable, _cell_indices

MODE_EXPECTATION = "expectation"
MODE_CE = "certainty_equivalence"


@dataclass(frozen=True)
class ConstraintBox:
    """Axis-aligned position bounds applied to robot and obstacle."""

    lo: Vec2
    hi: Vec2

    def __post_init__(self) -> None:
        if self.lo.x > self.hi.x or self.lo.y > self.hi.y:
            raise ValueError("box must satisfy lo <= hi componentwise")

    def contains(self, p: Vec2) -> bool:
        return self.lo.x <= p.x <= self.hi.x and self.lo.y <= p.y <= self.hi.y

    def clamp(self, p: Vec2) -> Vec2:
        return Vec2(
            min(max(p.x, self.lo.x), self.hi.x),
            min(max(p.y, self.lo.y), self.hi.y),
        )


@dataclass(frozen=True)
class RolloutConfig:
    """Lookahead controls.

    ``scenario_count`` is only used in expectation mode.  The infeasibility
    penalty must dominate any reachable cost sum so the argmin is always
    well defined.
    """

    horizon: int
    mode: str = MODE_EXPECTATION
    scenario_count: int = 64
    infeasibility_penalty: float = 1e9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.scenario_count < 1:
            raise ValueError("scenario_count must be >= 1")
        if self.mode not in (MODE_EXPECTATION, MODE_CE):
            raise ValueError(f"unknown mode {self.mode!r}")


def draw_scenarios(
    W: DisturbanceModel, horizon: int, count: int, seed: int
) -> np.ndarray:
    """(count, horizon, 2) disturbance sequences, i.i.d. per step from W."""
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.choice(len(W), size=(count, horizon), p=W.probs())
    return W.array()[idx]


def _search(
    s: WorldState,
    t: Vec2,
    table: ValueTable,
    U: ActionSet,
    W: DisturbanceModel,
    box: ConstraintBox,
    cfg: RolloutConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exhaustive sequence search.

    Returns (sequences, objectives, scenarios): all |U|^N index sequences in
    lexicographic order, their scenario-averaged objectives, and the (M, N, 2)
    scenario array used.  Lexicographic order makes np.argmin's first-match
    rule the canonical tie-break on the first action.
    """
    n = cfg.horizon
    U_arr = U.array()
    na = len(U_arr)
    p = table.cost_params

    grids = np.meshgrid(*([np.arange(na)] * n), indexing="ij")
    seqs = np.stack([g.ravel() for g in grids], axis=1)  # (S, n)

    if cfg.mode == MODE_CE:
        wbar = mean_disturbance(W)
        scenarios = np.broadcast_to(
            np.array([wbar.x, wbar.y]), (1, n, 2)
        ).copy()
    else:
        scenarios = draw_scenarios(W, n, cfg.scenario_count, cfg.seed)
    m = len(scenarios)

    # Robot path depends only on the candidate sequence, obstacle path only
    # on the scenario; stage costs couple them by broadcasting (S, M).
    r_path = s.r.as_array() + np.cumsum(U_arr[seqs], axis=1)  # (S, n, 2)
    lo = np.array([box.lo.x, box.lo.y])
    hi = np.array([box.hi.x, box.hi.y])
    h_path = np.empty((m, n, 2))
    h_cur = np.broadcast_to(s.h.as_array(), (m, 2)).copy()
    for l in range(n):
        h_cur = np.clip(h_cur + scenarios[:, l, :], lo, hi)
        h_path[:, l, :] = h_cur

    t_arr = t.as_array()
    total = np.zeros((len(seqs), m))
    for l in range(n):
        if l == 0:
            r_l = s.r.as_array()[None, :]  # (1, 2)
            h_l = s.h.as_array()[None, :]  # (1, 2)
        else:
            r_l = r_path[:, l - 1, :]  # (S, 2)
            h_l = h_path[:, l - 1, :]  # (M, 2)
        e_l = np.hypot(r_l[:, 0] - t_arr[0], r_l[:, 1] - t_arr[1])  # (S or 1,)
        d_l = np.hypot(
            h_l[None, :, 0] - r_l[:, None, 0], h_l[None, :, 1] - r_l[:, None, 1]
        )  # (S or 1, M or 1)
        stage = np.where(
            e_l[:, None] > p.R,
            p.lam * (e_l[:, None] - p.R) ** 2 + (1.0 - p.lam) / (d_l + p.epsilon),
            0.0,
        )
        total += stage

    # Soft box constraint: every lookahead step with the robot outside adds
    # one penalty (scenario-independent; the robot path is deterministic).
    viol = (
        (r_path[:, :, 0] < lo[0])
        | (r_path[:, :, 0] > hi[0])
        | (r_path[:, :, 1] < lo[1])
        | (r_path[:, :, 1] > hi[1])
    )
    total += (viol.sum(axis=1) * cfg.infeasibility_penalty)[:, None]

    # Terminal penalty from the reduced-space table.
    r_n = r_path[:, -1, :]
    h_n = h_path[:, -1, :]
    d_T, e_T, th_T = reduce_arrays(
        h_n[None, :, 0],
        h_n[None, :, 1],
        r_n[:, None, 0],
        r_n[:, None, 1],
        t_arr[0],
        t_arr[1],
    )
    total += table.coefficients[_cell_indices(table.grid, d_T, e_T, th_T)]

    objectives = total.mean(axis=1)
    return seqs, objectives, scenarios


def plan(
    s: WorldState,
    t: Vec2,
    table: ValueTable,
    U: ActionSet,
    W: DisturbanceModel,
    box: ConstraintBox,
    cfg: RolloutConfig,
) -> tuple[Vec2, float]:
    """Pick the next action by exhaustive N-step lookahead.

    Returns the first action of the best open-loop sequence and the value of
    the lookahead objective at the optimum.
    """
    seqs, objectives, _ = _search(s, t, table, U, W, box, cfg)
    best = int(np.argmin(objectives))
    return U.actions[seqs[best, 0]], float(objectives[best])


Controller = Callable[[WorldState, Vec2], Vec2]


def make_rollout_controller(
    table: ValueTable,
    U: ActionSet,
    W: DisturbanceModel,
    box: ConstraintBox,
    cfg: RolloutConfig,
) -> Controller:
    """Bind the rollout planner into a (state, target) -> action callback."""

    def control(s: WorldState, t: Vec2) -> Vec2:
        u, _ = plan(s, t, table, U, W, box, cfg)
        return u

    return control


class TrajectoryStep(NamedTuple):
    step: int
    r: Vec2
    h: Vec2
    u: Vec2
    w: Vec2


@dataclass
class EpisodeResult:
    """Closed-loop episode metrics.

    ``time_to_target`` is the number of steps until the robot first entered
    the arrival disc (or ``max_steps`` on timeout), ``min_distance`` the
    smallest robot-obstacle distance over all visited states including the
    final one.  The trajectory records one row per visited state; the final
    row carries zero action/disturbance.
    """

    time_to_target: int
    min_distance: float
    collided: bool
    timed_out: bool
    trajectory: list[TrajectoryStep] = field(default_factory=list)
    fallback_count: int = 0


_ZERO = Vec2(0.0, 0.0)


def simulate_episode(
    s0: WorldState,
    t: Vec2,
    controller: Controller,
    W: DisturbanceModel,
    p: CostParams,
    box: ConstraintBox,
    max_steps: int,
    seed: int,
) -> EpisodeResult:
    """Run one closed-loop episode.

    Each step queries the controller, draws a disturbance, advances both
    agents and clamps the obstacle into the box.  The episode ends at the
    first state inside the arrival disc or after ``max_steps`` (timeout).
    Collisions are recorded but do not terminate the episode.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    probs = W.probs()
    h, r = s0.h, s0.r
    trajectory: list[TrajectoryStep] = []
    min_distance = (h - r).norm()
    collided = min_distance <= p.R
    fall_before = _controller_fallbacks(controller)

    time_to_target = max_steps
    timed_out = True
    for k in range(max_steps):
        if (r - t).norm() <= p.R:
            time_to_target = k
            timed_out = False
            break
        u = controller(WorldState(h=h, r=r), t)
        w = W.outcomes[int(rng.choice(len(W), p=probs))]
        trajectory.append(TrajectoryStep(step=k, r=r, h=h, u=u, w=w))
        r = r + u
        h = box.clamp(h + w)
        dist = (h - r).norm()
        min_distance = min(min_distance, dist)
        collided = collided or dist <= p.R
    else:
        if (r - t).norm() <= p.R:  # arrival exactly at the step cap
            time_to_target = max_steps
            timed_out = False
    trajectory.append(TrajectoryStep(step=len(trajectory), r=r, h=h, u=_ZERO, w=_ZERO))

    return EpisodeResult(
        time_to_target=time_to_target,
        min_distance=min_distance,
        collided=collided,
        timed_out=timed_out,
        trajectory=trajectory,
        fallback_count=_controller_fallbacks(controller) - fall_before,
    )


def _controller_fallbacks(controller) -> int:
    return int(getattr(controller, "fallback_count", 0))
