import itertools
import math

import numpy as np
import pytest

from symplan.action_models import (
    build_action_set,
    build_disturbance_point_mass,
    build_disturbance_uniform,
    mean_disturbance,
)
from symplan.geometry import CostParams, Vec2, WorldState
from symplan.rollout import (
    MODE_CE,
    MODE_EXPECTATION,
    ConstraintBox,
    RolloutConfig,
    _search,
    draw_scenarios,
    plan,
    simulate_episode,
)
from symplan.value_solver import PartitionGrid, ValueTable, evaluate_full

BIG_BOX = ConstraintBox(lo=Vec2(-1e6, -1e6), hi=Vec2(1e6, 1e6))


def three_cell_table(coeffs=(0.0, 2.0, 5.0), lam=0.5, n2=2):
    grid = PartitionGrid(
        d_edges=[0.0, 40.0],
        e_edges=[0.0, 1.5, 3.0, 40.0],
        theta_edges=[0.0, math.pi],
    )
    return ValueTable(
        grid=grid,
        coefficients=np.array(coeffs, dtype=float),
        cost_params=CostParams(lam=lam, R=1.0, epsilon=1e-2),
        n1=2,
        n2=n2,
        disturbance=build_disturbance_uniform(n2),
    )


def brute_force_objective(s, t, table, U, seq, scenarios, box, penalty):
    """Loop-based reimplementation of the lookahead objective."""
    p = table.cost_params
    vals = []
    for scenario in scenarios:
        r = (s.r.x, s.r.y)
        h = (s.h.x, s.h.y)
        total = 0.0
        for l, u_idx in enumerate(seq):
            e = math.hypot(r[0] - t.x, r[1] - t.y)
            d = math.hypot(h[0] - r[0], h[1] - r[1])
            if e > p.R:
                total += p.lam * (e - p.R) ** 2 + (1 - p.lam) / (d + p.epsilon)
            u = U.actions[u_idx]
            r = (r[0] + u.x, r[1] + u.y)
            w = scenario[l]
            h = (
                min(max(h[0] + w[0], box.lo.x), box.hi.x),
                min(max(h[1] + w[1], box.lo.y), box.hi.y),
            )
            if not (box.lo.x <= r[0] <= box.hi.x and box.lo.y <= r[1] <= box.hi.y):
                total += penalty
        total += evaluate_full(
            table, WorldState(h=Vec2(*h), r=Vec2(*r)), t
        )
        vals.append(total)
    return sum(vals) / len(vals)


def brute_force_plan(s, t, table, U, scenarios, box, penalty):
    n = len(scenarios[0])
    best_val = math.inf
    best_seq = None
    for seq in itertools.product(range(len(U.actions)), repeat=n):
        val = brute_force_objective(s, t, table, U, seq, scenarios, box, penalty)
        if val < best_val:
            best_val = val
            best_seq = seq
    return U.actions[best_seq[0]], best_val


class TestPlan:
    def test_tie_break_returns_first_action(self):
        # zero table, N=1: the stage cost at the current state is the same
        # for every candidate, so everything ties and index 0 wins
        table = three_cell_table(coeffs=(0.0, 0.0, 0.0))
        U = build_action_set(2)
        W = build_disturbance_uniform(2)
        cfg = RolloutConfig(horizon=1, mode=MODE_EXPECTATION, scenario_count=8, seed=4)
        s = WorldState(h=Vec2(10.0, 10.0), r=Vec2(5.0, 5.0))
        u, _ = plan(s, Vec2(0.0, 0.0), table, U, W, BIG_BOX, cfg)
        assert u == U.actions[0]

    def test_point_mass_modes_coincide(self):
        table = three_cell_table()
        U = build_action_set(2)
        W = build_disturbance_point_mass(Vec2(1.0, 0.0))
        s = WorldState(h=Vec2(4.0, 2.0), r=Vec2(8.0, 7.0))
        t = Vec2(1.0, 1.0)
        for seed in (0, 9, 123):
            cfg_e = RolloutConfig(horizon=2, mode=MODE_EXPECTATION, scenario_count=64, seed=seed)
            cfg_c = RolloutConfig(horizon=2, mode=MODE_CE, scenario_count=1, seed=seed)
            u_e, v_e = plan(s, t, table, U, W, BIG_BOX, cfg_e)
            u_c, v_c = plan(s, t, table, U, W, BIG_BOX, cfg_c)
            assert u_e == u_c
            # averaging M identical scenario values only differs by ulps
            assert v_e == pytest.approx(v_c, rel=1e-12)

    def test_matches_brute_force_point_mass_tree(self):
        # with a point-mass disturbance the scenario tree collapses, so the
        # sampled expectation is the exact one
        table = three_cell_table(lam=0.3)
        U = build_action_set(2)
        W = build_disturbance_point_mass(Vec2(0.0, -1.0))
        cfg = RolloutConfig(horizon=2, mode=MODE_EXPECTATION, scenario_count=16, seed=2)
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))
        s = WorldState(h=Vec2(6.0, 5.0), r=Vec2(9.0, 9.0))
        t = Vec2(2.0, 2.0)
        u, val = plan(s, t, table, U, W, box, cfg)
        scenarios = [[(0.0, -1.0)] * 2]
        bu, bval = brute_force_plan(s, t, table, U, scenarios, box, cfg.infeasibility_penalty)
        assert u == bu
        assert val == pytest.approx(bval, abs=1e-10)

    def test_matches_brute_force_ce(self):
        table = three_cell_table(lam=0.7)
        U = build_action_set(2)
        W = build_disturbance_uniform(2)
        cfg = RolloutConfig(horizon=2, mode=MODE_CE, seed=5)
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))
        s = WorldState(h=Vec2(3.0, 8.0), r=Vec2(12.0, 4.0))
        t = Vec2(5.0, 15.0)
        u, val = plan(s, t, table, U, W, box, cfg)
        wbar = mean_disturbance(W)
        scenarios = [[(wbar.x, wbar.y)] * 2]
        bu, bval = brute_force_plan(s, t, table, U, scenarios, box, cfg.infeasibility_penalty)
        assert u == bu
        assert val == pytest.approx(bval, abs=1e-10)

    def test_matches_brute_force_on_common_scenarios(self):
        # the sampled-expectation search against an independent loop over the
        # same scenario draws
        table = three_cell_table(lam=0.5)
        U = build_action_set(2)
        W = build_disturbance_uniform(2)
        cfg = RolloutConfig(horizon=2, mode=MODE_EXPECTATION, scenario_count=25, seed=31)
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))
        s = WorldState(h=Vec2(6.0, 6.0), r=Vec2(10.0, 11.0))
        t = Vec2(3.0, 4.0)
        u, val = plan(s, t, table, U, W, box, cfg)
        scen = draw_scenarios(W, cfg.horizon, cfg.scenario_count, cfg.seed)
        scenarios = [[tuple(step) for step in sc] for sc in scen]
        bu, bval = brute_force_plan(s, t, table, U, scenarios, box, cfg.infeasibility_penalty)
        assert u == bu
        assert val == pytest.approx(bval, abs=1e-10)

    def test_ce_invariant_to_seed_and_scenario_count(self):
        table = three_cell_table()
        U = build_action_set(2)
        W = build_disturbance_uniform(2)
        s = WorldState(h=Vec2(4.0, 9.0), r=Vec2(11.0, 3.0))
        t = Vec2(6.0, 6.0)
        ref = plan(s, t, table, U, W, BIG_BOX, RolloutConfig(horizon=2, mode=MODE_CE, seed=0))
        for seed, m in ((7, 3), (99, 128)):
            got = plan(
                s, t, table, U, W, BIG_BOX,
                RolloutConfig(horizon=2, mode=MODE_CE, scenario_count=m, seed=seed),
            )
            assert got == ref

    def test_rotation_equivariance_of_optimal_value(self):
        # rotating the scene about the target by a multiple of pi/n1 permutes
        # the candidate set, so the optimal value is unchanged (CE mode with
        # the zero-mean uniform disturbance keeps the scenario invariant too)
        n1 = 4
        U = build_action_set(n1)
        W = build_disturbance_uniform(n1)
        grid = PartitionGrid(
            d_edges=np.linspace(0.0, 40.0, 9),
            e_edges=np.linspace(0.0, 40.0, 9),
            theta_edges=np.linspace(0.0, math.pi, 5),
        )
        rng = np.random.default_rng(3)
        table = ValueTable(
            grid=grid,
            coefficients=rng.random(grid.num_cells),
            cost_params=CostParams(lam=0.5, R=1.0, epsilon=1e-2),
            n1=n1,
            n2=n1,
            disturbance=W,
        )
        t = Vec2(2.0, 3.0)
        s = WorldState(h=Vec2(7.0, 4.0), r=Vec2(5.0, 8.0))
        cfg = RolloutConfig(horizon=2, mode=MODE_CE, seed=0)
        _, v0 = plan(s, t, table, U, W, BIG_BOX, cfg)
        from symplan.geometry import rotate_state

        for k in (1, 2, 5):
            beta = k * math.pi / n1
            _, vk = plan(rotate_state(s, t, beta), t, table, U, W, BIG_BOX, cfg)
            assert vk == pytest.approx(v0, abs=1e-9)

    def test_objective_decomposition(self):
        # the reported optimum equals re-simulating the winning sequence
        # under the same scenarios and summing costs
        table = three_cell_table(lam=0.2)
        U = build_action_set(2)
        W = build_disturbance_uniform(2)
        cfg = RolloutConfig(horizon=3, mode=MODE_EXPECTATION, scenario_count=16, seed=8)
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))
        s = WorldState(h=Vec2(8.0, 3.0), r=Vec2(14.0, 12.0))
        t = Vec2(4.0, 4.0)
        seqs, objectives, scenarios = _search(s, t, table, U, W, box, cfg)
        best = int(np.argmin(objectives))
        resim = brute_force_objective(
            s, t, table, U, list(seqs[best]),
            [[tuple(step) for step in sc] for sc in scenarios],
            box, cfg.infeasibility_penalty,
        )
        assert objectives[best] == pytest.approx(resim, abs=1e-10)

    def test_box_violation_penalised(self):
        # robot hemmed in at the corner: leaving the box must never win
        table = three_cell_table(coeffs=(0.0, 0.0, 0.0), lam=1.0)
        U = build_action_set(2)
        W = build_disturbance_point_mass(Vec2(0.0, 0.0))
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))
        cfg = RolloutConfig(horizon=1, mode=MODE_CE, seed=0)
        s = WorldState(h=Vec2(10.0, 10.0), r=Vec2(0.0, 0.0))
        u, _ = plan(s, Vec2(15.0, 0.0), table, U, W, box, cfg)
        assert u == Vec2(1.0, 0.0)


class TestConfigValidation:
    def test_rollout_config(self):
        with pytest.raises(ValueError):
            RolloutConfig(horizon=0)
        with pytest.raises(ValueError):
            RolloutConfig(horizon=1, scenario_count=0)
        with pytest.raises(ValueError):
            RolloutConfig(horizon=1, mode="nope")

    def test_box(self):
        with pytest.raises(ValueError):
            ConstraintBox(lo=Vec2(1, 0), hi=Vec2(0, 1))


class TestSimulateEpisode:
    def controller_south(self, s, t):
        return Vec2(0.0, -1.0)

    def test_start_at_target(self):
        p = CostParams(lam=1.0, R=1.0)
        W = build_disturbance_point_mass(Vec2(0, 0))
        res = simulate_episode(
            WorldState(h=Vec2(5, 5), r=Vec2(0.5, 0.0)),
            Vec2(0, 0),
            self.controller_south,
            W, p, BIG_BOX, max_steps=10, seed=1,
        )
        assert res.time_to_target == 0
        assert not res.timed_out
        assert len(res.trajectory) == 1

    def test_same_seed_identical_trajectory(self):
        p = CostParams(lam=0.5, R=1.0)
        W = build_disturbance_uniform(4)
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))
        s0 = WorldState(h=Vec2(4, 4), r=Vec2(12, 14))

        def controller(s, t):
            return Vec2(0.0, -1.0) if s.r.y > t.y else Vec2(-1.0, 0.0)

        a = simulate_episode(s0, Vec2(3, 3), controller, W, p, box, 50, seed=42)
        b = simulate_episode(s0, Vec2(3, 3), controller, W, p, box, 50, seed=42)
        assert a.trajectory == b.trajectory
        assert a.time_to_target == b.time_to_target
        assert a.min_distance == b.min_distance
        c = simulate_episode(s0, Vec2(3, 3), controller, W, p, box, 50, seed=43)
        assert c.trajectory != a.trajectory

    def test_obstacle_clamped_into_box(self):
        p = CostParams(lam=1.0, R=1.0)
        W = build_disturbance_point_mass(Vec2(1.0, 0.0))
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(5, 5))
        res = simulate_episode(
            WorldState(h=Vec2(4.5, 2.0), r=Vec2(3.0, 5.0)),
            Vec2(3.0, 0.0),
            self.controller_south,
            W, p, box, max_steps=6, seed=0,
        )
        assert all(step.h.x <= 5.0 for step in res.trajectory)

    def test_timeout_and_metrics(self):
        p = CostParams(lam=1.0, R=1.0)
        W = build_disturbance_point_mass(Vec2(0, 0))

        def controller(s, t):  # never makes progress
            return Vec2(0.0, 0.0)

        res = simulate_episode(
            WorldState(h=Vec2(9, 0), r=Vec2(5, 0)),
            Vec2(0, 0),
            controller, W, p, BIG_BOX, max_steps=12, seed=3,
        )
        assert res.timed_out
        assert res.time_to_target == 12
        assert len(res.trajectory) == 13
        assert res.min_distance == pytest.approx(4.0)
        assert not res.collided

    def test_collision_flag_and_min_distance(self):
        p = CostParams(lam=1.0, R=1.0)
        W = build_disturbance_point_mass(Vec2(-1.0, 0.0))

        def controller(s, t):
            return Vec2(1.0, 0.0)  # drive straight at the obstacle

        res = simulate_episode(
            WorldState(h=Vec2(6, 0), r=Vec2(0, 0)),
            Vec2(30.0, 0.0),
            controller, W, p, BIG_BOX, max_steps=5, seed=0,
        )
        assert res.collided
        assert res.min_distance == 0.0

    def test_min_distance_is_prefix_monotone(self):
        # truncating the trajectory can only increase the running minimum
        p = CostParams(lam=0.5, R=1.0)
        W = build_disturbance_uniform(2)
        box = ConstraintBox(lo=Vec2(0, 0), hi=Vec2(20, 20))

        def controller(s, t):
            return Vec2(-1.0, 0.0) if s.r.x > t.x else Vec2(0.0, 0.0)

        res = simulate_episode(
            WorldState(h=Vec2(10, 11), r=Vec2(18, 10)),
            Vec2(2, 10),
            controller, W, p, box, 40, seed=11,
        )
        dists = [(step.h - step.r).norm() for step in res.trajectory]
        running = math.inf
        for k in range(1, len(dists) + 1):
            running = min(dists[:k])
            assert running >= min(dists)
        assert min(dists) == pytest.approx(res.min_distance)
