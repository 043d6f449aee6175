import math

import numpy as np
import pytest

from symplan.geometry import (
    CostParams,
    ReducedState,
    Vec2,
    WorldState,
    incremental_cost,
    lift,
    moving_frame_angle,
    reduce,
    reduced_cost,
    rotate_about,
    rotate_state,
    step_full,
    step_reduced,
)


def rand_vec(rng, scale=10.0):
    return Vec2(*(rng.random(2) * scale - scale / 2))


class TestStepFull:
    def test_additive(self):
        s = step_full(
            WorldState(h=Vec2(0, 0), r=Vec2(1, 1)), u=Vec2(1, 0), w=Vec2(0, 1)
        )
        assert (s.h.x, s.h.y) == (0, 1)
        assert (s.r.x, s.r.y) == (2, 1)

    def test_identity(self):
        s0 = WorldState(h=Vec2(3.5, -2.0), r=Vec2(0.25, 7.0))
        s = step_full(s0, Vec2(0, 0), Vec2(0, 0))
        assert s == s0

    def test_second_example(self):
        s = step_full(
            WorldState(h=Vec2(2, 6), r=Vec2(4, 12)), u=Vec2(0, -1), w=Vec2(1, 0)
        )
        assert (s.h.x, s.h.y) == (3, 6)
        assert (s.r.x, s.r.y) == (4, 11)


class TestIncrementalCost:
    def test_inside_arrival_radius(self):
        p = CostParams(lam=0.5, R=1.0)
        s = WorldState(h=Vec2(5, 5), r=Vec2(0.5, 0))
        assert incremental_cost(s, Vec2(0, 0), p) == 0.0

    def test_pure_attraction(self):
        p = CostParams(lam=1.0, R=1.0)
        s = WorldState(h=Vec2(9, 9), r=Vec2(3, 0))
        assert incremental_cost(s, Vec2(0, 0), p) == pytest.approx(4.0, abs=1e-15)

    def test_pure_repulsion(self):
        p = CostParams(lam=0.0, R=1.0, epsilon=1e-8)
        s = WorldState(h=Vec2(3, 0), r=Vec2(2, 0))
        expected = 1.0 / (1.0 + 1e-8)
        assert incremental_cost(s, Vec2(0, 0), p) == pytest.approx(expected, rel=1e-15)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            CostParams(lam=1.5)
        with pytest.raises(ValueError):
            CostParams(lam=0.5, R=0.0)
        with pytest.raises(ValueError):
            CostParams(lam=0.5, epsilon=0.0)


class TestReducedCost:
    def test_terminal(self):
        assert reduced_cost(ReducedState(d=5, e=0.9, theta=0.3), CostParams(lam=0.7)) == 0.0

    def test_direct_evaluation(self):
        p = CostParams(lam=0.5, R=1.0, epsilon=1e-8)
        got = reduced_cost(ReducedState(d=2, e=3, theta=1.0), p)
        assert got == pytest.approx(0.5 * 4 + 0.5 / (2 + 1e-8), rel=1e-14)

    def test_agrees_with_incremental_on_lifted_states(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            h, r, t = rand_vec(rng), rand_vec(rng), rand_vec(rng)
            p = CostParams(lam=float(rng.random()), R=1.0, epsilon=1e-6)
            s = WorldState(h=h, r=r)
            assert reduced_cost(reduce(s, t), p) == pytest.approx(
                incremental_cost(s, t, p), rel=1e-12, abs=1e-12
            )


class TestMovingFrame:
    def test_already_on_cross_section(self):
        assert moving_frame_angle(Vec2(2, 0), Vec2(0, 0)) == 0.0

    def test_quarter_turn(self):
        beta = moving_frame_angle(Vec2(0, 2), Vec2(0, 0))
        assert beta == pytest.approx(-math.pi / 2, abs=1e-15)
        rotated = rotate_about(Vec2(0, 2), Vec2(0, 0), beta)
        assert rotated.x == pytest.approx(2.0, abs=1e-15)
        assert rotated.y == pytest.approx(0.0, abs=1e-15)

    def test_rotation_lands_on_cross_section(self):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            r, t = rand_vec(rng), rand_vec(rng)
            if (r - t).norm() < 1e-9:
                continue
            beta = moving_frame_angle(r, t)
            rot = rotate_about(r, t, beta)
            e = (r - t).norm()
            assert abs(rot.x - t.x - e) < 1e-12
            assert abs(rot.y - t.y) < 1e-12
            assert rot.x - t.x > 0.0

    def test_degenerate_input(self):
        with pytest.raises(ValueError):
            moving_frame_angle(Vec2(1.0, 2.0), Vec2(1.0, 2.0))


class TestReduce:
    def test_orthogonal(self):
        rs = reduce(WorldState(h=Vec2(3, 4), r=Vec2(3, 0)), Vec2(0, 0))
        assert rs.d == pytest.approx(4.0, abs=1e-15)
        assert rs.e == pytest.approx(3.0, abs=1e-15)
        assert rs.theta == pytest.approx(math.pi / 2, abs=1e-15)

    def test_degenerate_obstacle_on_robot(self):
        rs = reduce(WorldState(h=Vec2(2, 2), r=Vec2(2, 2)), Vec2(0, 0))
        assert rs.d == 0.0
        assert rs.e == pytest.approx(math.hypot(2, 2), abs=1e-15)
        assert rs.theta == 0.0

    def test_rotation_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            s = WorldState(h=rand_vec(rng), r=rand_vec(rng))
            t = rand_vec(rng)
            beta = float(rng.random() * 4 * math.pi - 2 * math.pi)
            rs0 = reduce(s, t)
            rs1 = reduce(rotate_state(s, t, beta), t)
            assert rs1.d == pytest.approx(rs0.d, abs=1e-10)
            assert rs1.e == pytest.approx(rs0.e, abs=1e-10)
            assert rs1.theta == pytest.approx(rs0.theta, abs=1e-10)

    def test_reflection_invariance(self):
        # reflecting h across the line through t and r does not change (d, e, theta)
        rng = np.random.default_rng(5)
        for _ in range(500):
            t, r, h = rand_vec(rng), rand_vec(rng), rand_vec(rng)
            if (r - t).norm() < 1e-6:
                continue
            axis = r - t
            n = axis.norm()
            ux, uy = axis.x / n, axis.y / n
            v = h - t
            proj = v.x * ux + v.y * uy
            h_ref = Vec2(
                t.x + 2 * proj * ux - v.x,
                t.y + 2 * proj * uy - v.y,
            )
            rs0 = reduce(WorldState(h=h, r=r), t)
            rs1 = reduce(WorldState(h=h_ref, r=r), t)
            assert rs1.d == pytest.approx(rs0.d, abs=1e-10)
            assert rs1.e == pytest.approx(rs0.e, abs=1e-10)
            assert rs1.theta == pytest.approx(rs0.theta, abs=1e-10)

    def test_clamped_arccos_never_raises(self):
        # exactly colinear vectors can push the cosine past +-1 by ulps
        for k in (1.0, 1e-8, 1e8, 3.3333333333):
            rs = reduce(WorldState(h=Vec2(2 * k, 2 * k), r=Vec2(k, k)), Vec2(0, 0))
            assert rs.theta == pytest.approx(0.0, abs=1e-7)
            rs = reduce(WorldState(h=Vec2(2 * k, 2 * k), r=Vec2(k, k)), Vec2(3 * k, 3 * k))
            assert rs.theta == pytest.approx(math.pi, abs=1e-7)


class TestLift:
    def test_example(self):
        s = lift(ReducedState(d=4, e=3, theta=math.pi / 2), Vec2(0, 0))
        assert s.r.x == pytest.approx(3.0, abs=1e-15)
        assert s.r.y == 0.0
        assert s.h.x == pytest.approx(3.0, abs=1e-12)
        assert s.h.y == pytest.approx(4.0, abs=1e-12)

    def test_degenerate_d(self):
        s = lift(ReducedState(d=0, e=5, theta=0), Vec2(1, 1))
        assert (s.r.x, s.r.y) == (6.0, 1.0)
        assert (s.h.x, s.h.y) == (6.0, 1.0)

    def test_round_trip(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            rs = ReducedState(
                d=1e-6 + float(rng.random() * 20),
                e=1e-6 + float(rng.random() * 20),
                theta=float(rng.random() * math.pi),
            )
            t = rand_vec(rng)
            back = reduce(lift(rs, t), t)
            assert back.d == pytest.approx(rs.d, abs=1e-10)
            assert back.e == pytest.approx(rs.e, abs=1e-10)
            assert back.theta == pytest.approx(rs.theta, abs=1e-10)


class TestStepReduced:
    def test_identity(self):
        rs = ReducedState(d=3.0, e=2.0, theta=0.7)
        nxt = step_reduced(rs, Vec2(0, 0), Vec2(0, 0))
        assert nxt.d == pytest.approx(rs.d, abs=1e-15)
        assert nxt.e == pytest.approx(rs.e, abs=1e-15)
        assert nxt.theta == pytest.approx(rs.theta, abs=1e-12)

    def test_colinear_closing(self):
        nxt = step_reduced(ReducedState(d=2, e=5, theta=0.0), Vec2(1, 0), Vec2(0, 0))
        assert nxt.d == pytest.approx(1.0, abs=1e-15)

    def test_matches_full_state_pipeline(self):
        rng = np.random.default_rng(17)
        t = Vec2(0.0, 0.0)
        for _ in range(2000):
            rs = ReducedState(
                d=float(rng.random() * 10),
                e=float(rng.random() * 10),
                theta=float(rng.random() * math.pi),
            )
            u, w = rand_vec(rng, 2.0), rand_vec(rng, 2.0)
            via_full = reduce(step_full(lift(rs, t), u, w), t)
            direct = step_reduced(rs, u, w)
            assert direct.d == pytest.approx(via_full.d, abs=1e-9)
            assert direct.e == pytest.approx(via_full.e, abs=1e-9)
            assert direct.theta == pytest.approx(via_full.theta, abs=1e-9)
