"""Baseline controllers: nominal goal-seeking, discrete-time CBF filters,
and receding-horizon A* over the unit-action graph.

All three are deterministic functions of their inputs.  The CBF filters pick
the feasible action closest to the nominal one; with a finite action set the
constrained argmin is exact by enumeration, no QP needed.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .action_models import ActionSet, DisturbanceModel, mean_disturbance
from .geometry import Vec2, WorldState
from .rollout import MODE_CE, MODE_EXPECTATION, ConstraintBox

# Positions are continuous (unit moves at irrational angles leave any
# lattice), so A* nodes are identified by rounding to this grid.
_NODE_QUANTUM = 1e-9
_DEFAULT_NODE_BUDGET = 1_000_000


@dataclass(frozen=True)
class CbfParams:
    """Barrier tuning: decay rate alpha in (0, 1) and clearance offset d0."""

    alpha: float
    d0: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.d0 <= 0.0:
            raise ValueError(f"d0 must be positive, got {self.d0}")


def nominal_control(s: WorldState, t: Vec2, U: ActionSet) -> Vec2:
    """Greedy goal-seeking: the action minimising next robot-target
    distance, ignoring the obstacle.  Canonical tie-break."""
    best_u = U.actions[0]
    best = math.inf
    for u in U.actions:
        dist = math.hypot(s.r.x + u.x - t.x, s.r.y + u.y - t.y)
        if dist < best:
            best = dist
            best_u = u
    return best_u


def barrier_value(s: WorldState, prm: CbfParams) -> float:
    """B(x) = |h - r| - d0; the safe set is B >= 0."""
    return (s.h - s.r).norm() - prm.d0


def cbf_control_info(
    s: WorldState,
    t: Vec2,
    U: ActionSet,
    W: DisturbanceModel,
    prm: CbfParams,
    mode: str = MODE_EXPECTATION,
) -> tuple[Vec2, bool]:
    """CBF-filtered action plus a feasibility flag.

    Feasible actions satisfy the one-step barrier decrease condition
    (expected next barrier, or the certainty-equivalent one, at least
    alpha times the current).  Among them the action nearest the nominal
    one wins; if none is feasible the least-violating action is returned
    and the flag is False.
    """
    if mode not in (MODE_EXPECTATION, MODE_CE):
        raise ValueError(f"unknown mode {mode!r}")
    b_now = barrier_value(s, prm)
    u_nom = nominal_control(s, t, U)

    if mode == MODE_CE:
        wbar = mean_disturbance(W)
        w_arr = np.array([[wbar.x, wbar.y]])
        probs = np.array([1.0])
    else:
        w_arr = W.array()
        probs = W.probs()
    hx = s.h.x + w_arr[:, 0]
    hy = s.h.y + w_arr[:, 1]

    best_feasible = None
    best_dist = math.inf
    best_lhs = -math.inf
    best_violating = None
    for u in U.actions:
        rx, ry = s.r.x + u.x, s.r.y + u.y
        lhs = float(probs @ np.hypot(hx - rx, hy - ry)) - prm.d0
        if lhs >= prm.alpha * b_now:
            dist = (u.x - u_nom.x) ** 2 + (u.y - u_nom.y) ** 2
            if dist < best_dist:
                best_dist = dist
                best_feasible = u
        if lhs > best_lhs:
            best_lhs = lhs
            best_violating = u
    if best_feasible is not None:
        return best_feasible, True
    return best_violating, False


def cbf_control(
    s: WorldState,
    t: Vec2,
    U: ActionSet,
    W: DisturbanceModel,
    prm: CbfParams,
    mode: str = MODE_EXPECTATION,
) -> Vec2:
    """See :func:`cbf_control_info`; drops the feasibility flag."""
    u, _ = cbf_control_info(s, t, U, W, prm, mode)
    return u


class CbfController:
    """Stateful wrapper counting infeasible-step fallbacks for episode logs."""

    def __init__(
        self,
        U: ActionSet,
        W: DisturbanceModel,
        prm: CbfParams,
        mode: str = MODE_EXPECTATION,
    ):
        self.U = U
        self.W = W
        self.prm = prm
        self.mode = mode
        self.fallback_count = 0

    def __call__(self, s: WorldState, t: Vec2) -> Vec2:
        u, feasible = cbf_control_info(s, t, self.U, self.W, self.prm, self.mode)
        if not feasible:
            self.fallback_count += 1
        return u


def _node_key(x: float, y: float) -> tuple[int, int]:
    return (round(x / _NODE_QUANTUM), round(y / _NODE_QUANTUM))


def astar_path(
    start: Vec2,
    t: Vec2,
    U: ActionSet,
    box: ConstraintBox,
    radius: float = 1.0,
    node_budget: int = _DEFAULT_NODE_BUDGET,
) -> list[Vec2] | None:
    """A* over the implicit graph whose edges are the unit actions of ``U``.

    The goal is the disc of ``radius`` around ``t``.  Path cost counts edges,
    so the integral Euclidean bound ceil(max(0, |pos - t| - radius)) is an
    admissible and consistent heuristic: every edge has length one and
    shrinks the distance by at most one.  Ties on f prefer deeper nodes,
    which keeps open-space searches near the straight line.  Returns the
    move sequence (empty if the start already satisfies the goal test), or
    None when the node budget is exhausted.
    """
    unit_moves = U.actions[: 2 * U.n1]

    def heuristic(x: float, y: float) -> int:
        return max(0, math.ceil(math.hypot(x - t.x, y - t.y) - radius))

    if math.hypot(start.x - t.x, start.y - t.y) <= radius:
        return []

    counter = 0
    start_key = _node_key(start.x, start.y)
    open_heap = [(heuristic(start.x, start.y), 0, counter, start.x, start.y)]
    g_score: dict[tuple[int, int], int] = {start_key: 0}
    parent: dict[tuple[int, int], tuple[tuple[int, int], Vec2]] = {}
    closed: set[tuple[int, int]] = set()
    expansions = 0

    while open_heap and expansions < node_budget:
        _, _, _, x, y = heapq.heappop(open_heap)
        key = _node_key(x, y)
        if key in closed:
            continue
        closed.add(key)
        expansions += 1
        if math.hypot(x - t.x, y - t.y) <= radius:
            moves: list[Vec2] = []
            k = key
            while k in parent:
                k, mv = parent[k]
                moves.append(mv)
            moves.reverse()
            return moves
        g_next = g_score[key] + 1
        for mv in unit_moves:
            nx, ny = x + mv.x, y + mv.y
            if not (box.lo.x <= nx <= box.hi.x and box.lo.y <= ny <= box.hi.y):
                continue
            nkey = _node_key(nx, ny)
            if nkey in closed:
                continue
            if g_next < g_score.get(nkey, 1 << 62):
                g_score[nkey] = g_next
                parent[nkey] = (key, mv)
                counter += 1
                heapq.heappush(
                    open_heap,
                    (g_next + heuristic(nx, ny), -g_next, counter, nx, ny),
                )
    return None


def astar_control(
    s: WorldState,
    t: Vec2,
    U: ActionSet,
    box: ConstraintBox,
    radius: float = 1.0,
    node_budget: int = _DEFAULT_NODE_BUDGET,
) -> Vec2:
    """First move of a fresh A* plan from the robot to the target disc.

    This baseline ignores the moving obstacle entirely.  If the disc is not
    reachable within the node budget the nominal controller takes over.
    """
    path = astar_path(s.r, t, U, box, radius=radius, node_budget=node_budget)
    if path is None:
        return nominal_control(s, t, U)
    if not path:
        return U.actions[U.zero_index]
    return path[0]


def make_astar_controller(
    U: ActionSet,
    box: ConstraintBox,
    radius: float = 1.0,
    node_budget: int = _DEFAULT_NODE_BUDGET,
):
    def control(s: WorldState, t: Vec2) -> Vec2:
        return astar_control(s, t, U, box, radius=radius, node_budget=node_budget)

    return control


def make_nominal_controller(U: ActionSet):
    def control(s: WorldState, t: Vec2) -> Vec2:
        return nominal_control(s, t, U)

    return control
