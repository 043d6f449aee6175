"""Desk-scale brute-force verification of the theory behind the toolkit.

A tiny discrete world (odd side length, target at the centre, exact integer
moves) makes the full-state value function exactly enumerable.  On it we
verify, numerically and independently of the production solver:

- the group-action axioms of the planar rotation action and its control /
  disturbance companions,
- the moving-frame construction (the rotation really lands states on the
  canonical cross-section with strictly positive x-offset),
- the invariance conditions on dynamics, cost, and disturbance law,
- invariance of the converged value function under every box-preserving
  symmetry (the symmetry theorem, instantiated on the lattice), and
- agreement between a reduced-space solve and the full-state table.

Only the box-preserving subgroup (quarter-turn rotations and axis/diagonal
reflections) maps the lattice world onto itself; continuous-rotation
invariance cannot be exact here and is reported, never asserted.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import geometry
from .action_models import (
    ActionSet,
    DisturbanceModel,
    build_action_set,
    build_disturbance_uniform,
)
from .geometry import (
    CostParams,
    Vec2,
    WorldState,
    incremental_cost,
    reduce,
    rotate_about,
    step_full,
)
from .value_solver import PartitionGrid, SolverConfig, _cell_indices, solve


@dataclass(frozen=True)
class RotationAngle:
    """A planar rotation; composition is addition modulo 2*pi."""

    beta: float


@dataclass(frozen=True)
class DiscreteWorld:
    """Odd-sided lattice box with the target at its exact centre.

    n1 = n2 = 2 keeps every move an exact integer vector, so the lattice is
    closed under the dynamics and the quarter-turn/reflection symmetry group
    maps the world onto itself.  Positions clamp at the boundary.
    """

    side: int = 9
    params: CostParams = field(default_factory=lambda: CostParams(lam=0.5, R=1.0, epsilon=1.0))

    def __post_init__(self) -> None:
        if self.side < 3 or self.side % 2 == 0:
            raise ValueError("side must be an odd integer >= 3")

    @property
    def center(self) -> int:
        return (self.side - 1) // 2

    @property
    def target(self) -> Vec2:
        return Vec2(float(self.center), float(self.center))

    @property
    def actions(self) -> ActionSet:
        return build_action_set(2)

    @property
    def disturbance(self) -> DisturbanceModel:
        return build_disturbance_uniform(2)

    @property
    def num_positions(self) -> int:
        return self.side * self.side

    @property
    def num_states(self) -> int:
        return self.num_positions**2

    def positions(self) -> np.ndarray:
        side = self.side
        return np.array(
            [(x, y) for x in range(side) for y in range(side)], dtype=float
        )


@dataclass
class FullValueTable:
    """Converged full-state values, indexed by (obstacle, robot) position."""

    world: DiscreteWorld
    values: np.ndarray  # flat over h_index * num_positions + r_index
    sweeps: int
    final_change: float

    def value(self, h: Vec2, r: Vec2) -> float:
        side = self.world.side
        hi = int(h.x) * side + int(h.y)
        ri = int(r.x) * side + int(r.y)
        return float(self.values[hi * self.world.num_positions + ri])


def _transition_tables(world: DiscreteWorld):
    side = world.side
    coords = world.positions()
    npos = world.num_positions
    moves = world.actions.array()
    pos_next = np.empty((npos, len(moves)), dtype=np.int64)
    for i, p in enumerate(coords):
        nxt = np.clip(p + moves, 0, side - 1)
        pos_next[i] = nxt[:, 0].astype(int) * side + nxt[:, 1].astype(int)
    h_idx = np.repeat(np.arange(npos), npos)
    r_idx = np.tile(np.arange(npos), npos)
    return coords, pos_next, h_idx, r_idx


def full_value_iteration(
    world: DiscreteWorld, tol: float = 1e-12, max_iters: int = 100_000
) -> FullValueTable:
    """Synchronous Bellman backups over all (h, r) pairs until the sup-norm
    change drops below ``tol``.  Terminal states (robot inside the arrival
    disc) are pinned at zero.  Raises if the cap is reached first."""
    p = world.params
    coords, pos_next, h_idx, r_idx = _transition_tables(world)
    npos = world.num_positions
    t = world.target.as_array()
    d = np.hypot(*(coords[h_idx] - coords[r_idx]).T)
    e = np.hypot(*(coords[r_idx] - t).T)
    terminal = e <= p.R
    stage = np.where(
        terminal, 0.0, p.lam * (e - p.R) ** 2 + (1.0 - p.lam) / (d + p.epsilon)
    )
    probs = world.disturbance.probs()
    # next-state index per (state, action, disturbance)
    nxt = pos_next[h_idx][:, None, :] * npos + pos_next[r_idx][:, :, None]

    values = np.zeros(world.num_states)
    for sweep in range(1, max_iters + 1):
        q = values[nxt] @ probs
        updated = stage + q.min(axis=1)
        updated[terminal] = 0.0
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change < tol:
            return FullValueTable(
                world=world, values=values, sweeps=sweep, final_change=change
            )
    raise RuntimeError(
        f"value iteration did not converge within {max_iters} sweeps "
        f"(last change {change:.3e}); the configuration may admit no proper policy"
    )


@dataclass(frozen=True)
class OracleCheck:
    """One verification result: worst residual against its tolerance."""

    name: str
    residual: float
    tolerance: float
    passed: bool
    details: dict

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: max residual {self.residual:.3e} (tol {self.tolerance:.1e})"


def _phi(beta: float, s: WorldState, t: Vec2) -> WorldState:
    return geometry.rotate_state(s, t, beta)


def check_group_axioms(
    angles: Iterable[RotationAngle],
    states: Iterable[WorldState],
    t: Vec2,
    tolerance: float = 1e-10,
) -> OracleCheck:
    """Composition, identity, and inverse axioms for the rotation action on
    states and its companions on controls and disturbances."""
    angles = list(angles)
    states = list(states)
    worst = 0.0
    for s in states:
        ident = _phi(0.0, s, t)
        worst = max(
            worst,
            abs(ident.h.x - s.h.x),
            abs(ident.h.y - s.h.y),
            abs(ident.r.x - s.r.x),
            abs(ident.r.y - s.r.y),
        )
        for a in angles:
            for b in angles:
                lhs = _phi(a.beta + b.beta, s, t)
                rhs = _phi(a.beta, _phi(b.beta, s, t), t)
                worst = max(
                    worst,
                    abs(lhs.h.x - rhs.h.x),
                    abs(lhs.h.y - rhs.h.y),
                    abs(lhs.r.x - rhs.r.x),
                    abs(lhs.r.y - rhs.r.y),
                )
            back = _phi(-a.beta, _phi(a.beta, s, t), t)
            worst = max(
                worst,
                abs(back.h.x - s.h.x),
                abs(back.h.y - s.h.y),
                abs(back.r.x - s.r.x),
                abs(back.r.y - s.r.y),
            )
    # chi and psi act by plain rotation about the origin
    origin = Vec2(0.0, 0.0)
    for a in angles:
        for b in angles:
            v = Vec2(1.0, 0.0)
            lhs = rotate_about(v, origin, a.beta + b.beta)
            rhs = rotate_about(rotate_about(v, origin, b.beta), origin, a.beta)
            worst = max(worst, abs(lhs.x - rhs.x), abs(lhs.y - rhs.y))
    return OracleCheck(
        name="group_axioms",
        residual=worst,
        tolerance=tolerance,
        passed=worst < tolerance,
        details={"angles": len(angles), "states": len(states)},
    )


def check_moving_frame(
    samples: Iterable[tuple[Vec2, Vec2]], tolerance: float = 1e-10
) -> OracleCheck:
    """The moving frame must rotate (r - t) onto (|r - t|, 0): zero y
    component and strictly positive x component (the cross-section demands
    strict positivity, which pins the sign of the frame angle)."""
    worst = 0.0
    positive = True
    count = 0
    for r, t in samples:
        count += 1
        beta = geometry.moving_frame_angle(r, t)
        rot = rotate_about(r, t, beta)
        e = (r - t).norm()
        worst = max(worst, abs(rot.x - t.x - e), abs(rot.y - t.y))
        if rot.x - t.x <= 0.0:
            positive = False
    return OracleCheck(
        name="moving_frame_cross_section",
        residual=worst,
        tolerance=tolerance,
        passed=positive and worst < tolerance,
        details={"samples": count, "strictly_positive_x": positive},
    )


def check_invariance_conditions(
    samples: Iterable[tuple[WorldState, Vec2, Vec2]],
    angles: Iterable[RotationAngle],
    t: Vec2,
    n2: int = 2,
    tolerance: float = 1e-10,
) -> OracleCheck:
    """Equivariance of the dynamics, invariance of the cost (for several
    lambda values), and invariance of the uniform disturbance law under the
    rotations that map the disturbance set onto itself."""
    samples = list(samples)
    angles = list(angles)
    origin = Vec2(0.0, 0.0)
    worst = 0.0
    for s, u, w in samples:
        for a in angles:
            moved = step_full(_phi(a.beta, s, t), rotate_about(u, origin, a.beta),
                              rotate_about(w, origin, a.beta))
            expect = _phi(a.beta, step_full(s, u, w), t)
            worst = max(
                worst,
                abs(moved.h.x - expect.h.x),
                abs(moved.h.y - expect.h.y),
                abs(moved.r.x - expect.r.x),
                abs(moved.r.y - expect.r.y),
            )
            for lam in (0.0, 0.5, 1.0):
                p = CostParams(lam=lam, R=1.0, epsilon=1e-3)
                worst = max(
                    worst,
                    abs(
                        incremental_cost(_phi(a.beta, s, t), t, p)
                        - incremental_cost(s, t, p)
                    ),
                )
    # disturbance-law invariance for rotations by multiples of pi/n2
    model = build_disturbance_uniform(n2)
    outs = model.array()
    probs = model.probs()
    for k in range(1, 2 * n2):
        beta = k * math.pi / n2
        c, sn = math.cos(beta), math.sin(beta)
        rot = outs @ np.array([[c, sn], [-sn, c]])
        for rv, pr in zip(rot, probs):
            dist = np.hypot(outs[:, 0] - rv[0], outs[:, 1] - rv[1])
            j = int(np.argmin(dist))
            if dist[j] > 1e-9:
                worst = max(worst, float(dist[j]))
            else:
                worst = max(worst, abs(probs[j] - pr))
    return OracleCheck(
        name="invariance_conditions",
        residual=worst,
        tolerance=tolerance,
        passed=worst < tolerance,
        details={"samples": len(samples), "angles": len(angles)},
    )


def _box_symmetries(world: DiscreteWorld):
    """The eight lattice maps fixing the box and the central target."""
    c = world.center
    return [
        lambda x, y: (x, y),
        lambda x, y: (c - (y - c), c + (x - c)),   # rot 90
        lambda x, y: (2 * c - x, 2 * c - y),       # rot 180
        lambda x, y: (c + (y - c), c - (x - c)),   # rot 270
        lambda x, y: (x, 2 * c - y),               # reflect horizontal axis
        lambda x, y: (2 * c - x, y),               # reflect vertical axis
        lambda x, y: (c + (y - c), c + (x - c)),   # reflect main diagonal
        lambda x, y: (c - (y - c), c - (x - c)),   # reflect anti-diagonal
    ]


def check_value_symmetry(table: FullValueTable, world: DiscreteWorld) -> float:
    """Max |V(sigma(x)) - V(x)| over the eight box-preserving symmetries."""
    side = world.side
    npos = world.num_positions
    h_idx = np.repeat(np.arange(npos), npos)
    r_idx = np.tile(np.arange(npos), npos)
    worst = 0.0
    for sig in _box_symmetries(world):
        perm = np.empty(npos, dtype=np.int64)
        for i in range(npos):
            x, y = divmod(i, side)
            xx, yy = sig(x, y)
            perm[i] = xx * side + yy
        mapped = perm[h_idx] * npos + perm[r_idx]
        worst = max(worst, float(np.max(np.abs(table.values[mapped] - table.values))))
    return worst


def symmetric_pair_report(table: FullValueTable, world: DiscreteWorld) -> dict:
    """Group lattice states by their reduced triple (equal d, e and folded
    angle -- the symmetric-pair relation) and measure value spread.

    Pairs related by a box-preserving symmetry must agree exactly; pairs
    related only by a continuous rotation/reflection outside the subgroup
    need not, since the lattice action set is not invariant under them.
    Both spreads are reported; only the subgroup one is a correctness claim.
    """
    side = world.side
    npos = world.num_positions
    coords = world.positions()
    t = world.target
    perms = []
    for sig in _box_symmetries(world):
        perm = np.empty(npos, dtype=np.int64)
        for i in range(npos):
            x, y = divmod(i, side)
            xx, yy = sig(x, y)
            perm[i] = xx * side + yy
        perms.append(perm)

    classes: dict[tuple, list[int]] = {}
    for hi in range(npos):
        for ri in range(npos):
            h = Vec2(*coords[hi])
            r = Vec2(*coords[ri])
            rs = reduce(WorldState(h=h, r=r), t)
            key = (round(rs.d, 9), round(rs.e, 9), round(rs.theta, 9))
            classes.setdefault(key, []).append(hi * npos + ri)

    subgroup_worst = 0.0
    full_worst = 0.0
    for states in classes.values():
        vals = table.values[states]
        full_worst = max(full_worst, float(vals.max() - vals.min()))
        base = states[0]
        bh, br = divmod(base, npos)
        orbit_vals = [table.values[base]]
        for perm in perms[1:]:
            orbit_vals.append(table.values[perm[bh] * npos + perm[br]])
        orbit_vals = np.array(orbit_vals)
        subgroup_worst = max(
            subgroup_worst, float(orbit_vals.max() - orbit_vals.min())
        )
    return {
        "subgroup_pair_spread": subgroup_worst,
        "same_triple_spread": full_worst,
        "triple_classes": len(classes),
    }


# ---------------------------------------------------------------------------
# Reduced-space solve vs. the full table.
# ---------------------------------------------------------------------------

def _realizable_axis_values(world: DiscreteWorld):
    """Sorted unique realizable d, e, theta values over all lattice states."""
    coords = world.positions()
    t = world.target.as_array()
    diffs = (coords[:, None, :] - coords[None, :, :]).reshape(-1, 2)
    d_vals = np.unique(np.round(np.hypot(diffs[:, 0], diffs[:, 1]), 12))
    e_vals = np.unique(np.round(np.hypot(coords[:, 0] - t[0], coords[:, 1] - t[1]), 12))
    vs = coords - t
    nz_v = vs[np.hypot(vs[:, 0], vs[:, 1]) > 0]
    nz_d = diffs[np.hypot(diffs[:, 0], diffs[:, 1]) > 0]
    # atan2(|cross|, dot) instead of arccos: both arguments are exact
    # integer-valued floats, so equal angles collapse to (near-)equal
    # doubles and stay inside [0, pi] (arccos near +-1 would smear them
    # over ~1e-8, and decimal rounding can push past pi)
    dots = nz_v @ nz_d.T
    cross = np.abs(np.outer(nz_v[:, 0], nz_d[:, 1]) - np.outer(nz_v[:, 1], nz_d[:, 0]))
    th_vals = np.unique(np.arctan2(cross, dots).ravel())
    th_vals = np.unique(np.concatenate([[0.0], th_vals, [math.pi]]))
    return d_vals, e_vals, th_vals


def _isolating_edges(values: np.ndarray, *, last: float | None = None) -> np.ndarray:
    """Edges putting each listed value in its own cell: midpoints between
    consecutive values, 0 in front, and a padded (or pinned) top edge."""
    mids = 0.5 * (values[1:] + values[:-1])
    top = values[-1] + 0.5 if last is None else last
    edges = np.concatenate([[0.0], mids, [top]])
    if values[0] != 0.0:
        # first value must still sit in the first cell
        edges[0] = 0.0
    return edges


def build_isolating_grid(world: DiscreteWorld) -> PartitionGrid:
    """A partition in which every realizable (d, e, theta) triple of the
    world occupies its own cell (per-axis midpoint edges)."""
    d_vals, e_vals, th_vals = _realizable_axis_values(world)
    return PartitionGrid(
        d_edges=_isolating_edges(d_vals),
        e_edges=_isolating_edges(e_vals),
        theta_edges=_isolating_edges(th_vals, last=math.pi),
    )


@dataclass(frozen=True)
class ReducedVsFullReport:
    """Agreement between the reduced solve and the full-state oracle."""

    max_error_cross_section: float
    max_error_all_states: float
    cells: int
    iterations: int
    cross_section_states: int

    def summary(self) -> str:
        return (
            f"reduced vs full: cross-section max err {self.max_error_cross_section:.3e} "
            f"over {self.cross_section_states} states "
            f"(all-state gap {self.max_error_all_states:.3e}, approximation expected)"
        )


def check_reduced_vs_full(
    table: FullValueTable,
    world: DiscreteWorld,
    grid: PartitionGrid | None = None,
) -> ReducedVsFullReport:
    """Solve the reduced problem on an isolating partition with samples at
    the realizable coordinate products, then compare against the full table.

    The comparison set is the states in correspondence with the reduced
    coordinates: lattice states on the canonical cross-section (robot due
    east of the target).  Off the cross-section the lattice action set is
    not the rotated action set, so the reduced fixed point legitimately
    differs there; that gap is reported, not asserted.
    """
    if grid is None:
        grid = build_isolating_grid(world)
    d_vals, e_vals, th_vals = _realizable_axis_values(world)
    D, E, TH = np.meshgrid(d_vals, e_vals, th_vals, indexing="ij")
    samples = np.stack([D.ravel(), E.ravel(), TH.ravel()], axis=1)

    cfg = SolverConfig(samples_per_cell=1, eps_tol=1e-13, max_iters=500, seed=0)
    reduced_table, deltas = solve(
        grid, world.params, world.actions, world.disturbance, cfg, samples=samples
    )

    coords = world.positions()
    npos = world.num_positions
    t = world.target
    err_cs = 0.0
    err_all = 0.0
    n_cs = 0
    for ri in range(npos):
        r = Vec2(*coords[ri])
        on_section = (r.y == t.y) and (r.x > t.x)
        for hi in range(npos):
            h = Vec2(*coords[hi])
            rs = reduce(WorldState(h=h, r=r), t)
            approx = reduced_table.coefficients[
                _cell_indices(grid, rs.d, rs.e, rs.theta)
            ]
            err = abs(float(approx) - float(table.values[hi * npos + ri]))
            err_all = max(err_all, err)
            if on_section:
                n_cs += 1
                err_cs = max(err_cs, err)
    return ReducedVsFullReport(
        max_error_cross_section=err_cs,
        max_error_all_states=err_all,
        cells=grid.num_cells,
        iterations=len(deltas),
        cross_section_states=n_cs,
    )


# ---------------------------------------------------------------------------
# The full battery, as run by the command-line `oracle` subcommand.
# ---------------------------------------------------------------------------

def run_all_checks(seed: int = 0, side: int = 9) -> list[OracleCheck]:
    rng = np.random.Generator(np.random.PCG64(seed))

    def rand_vec(scale=10.0):
        return Vec2(*(rng.random(2) * scale - scale / 2))

    t = Vec2(2.0, -1.0)
    states = [WorldState(h=rand_vec(), r=rand_vec()) for _ in range(200)]
    angles = [RotationAngle(beta=float(b)) for b in rng.random(20) * 4 * math.pi - 2 * math.pi]
    checks = [check_group_axioms(angles, states, t)]

    frame_samples = []
    while len(frame_samples) < 1000:
        r, tt = rand_vec(), rand_vec()
        if (r - tt).norm() > 1e-9:
            frame_samples.append((r, tt))
    checks.append(check_moving_frame(frame_samples))

    inv_samples = [
        (WorldState(h=rand_vec(), r=rand_vec()), rand_vec(2.0), rand_vec(2.0))
        for _ in range(200)
    ]
    checks.append(check_invariance_conditions(inv_samples, angles, t, n2=2))

    world = DiscreteWorld(side=side)
    started = time.perf_counter()
    table = full_value_iteration(world, tol=1e-12)
    elapsed = time.perf_counter() - started
    residual = check_value_symmetry(table, world)
    pairs = symmetric_pair_report(table, world)
    checks.append(
        OracleCheck(
            name="value_symmetry",
            residual=residual,
            tolerance=1e-9,
            passed=residual < 1e-9,
            details={
                "sweeps": table.sweeps,
                "solve_seconds": round(elapsed, 3),
                **pairs,
            },
        )
    )
    checks.append(
        OracleCheck(
            name="definition2_pairs_subgroup",
            residual=pairs["subgroup_pair_spread"],
            tolerance=1e-9,
            passed=pairs["subgroup_pair_spread"] < 1e-9,
            details={"same_triple_spread_reported": pairs["same_triple_spread"]},
        )
    )

    world_lam1 = DiscreteWorld(side=side, params=CostParams(lam=1.0, R=1.0, epsilon=1.0))
    table_lam1 = full_value_iteration(world_lam1, tol=1e-12)
    report = check_reduced_vs_full(table_lam1, world_lam1)
    checks.append(
        OracleCheck(
            name="reduced_vs_full_lambda1",
            residual=report.max_error_cross_section,
            tolerance=1e-6,
            passed=report.max_error_cross_section < 1e-6,
            details={
                "cells": report.cells,
                "iterations": report.iterations,
                "all_state_gap_reported": report.max_error_all_states,
            },
        )
    )
    return checks
