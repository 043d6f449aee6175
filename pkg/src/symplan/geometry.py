"""Planar geometry: full-state dynamics, stage cost, symmetry reduction, lift.

The world is a robot at ``r``, a stochastically moving obstacle at ``h``, and
a static target ``t``, all in the plane.  Rotating the whole scene about the
target (and reflecting across any line through it) changes neither distances
nor the angle between the target-to-robot and robot-to-obstacle directions,
so the pair ``(h, r)`` collapses to the reduced coordinates

    d     distance robot-obstacle
    e     distance robot-target
    theta angle between (r - t) and (h - r), folded into [0, pi]

All functions here are pure; they are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absolute cutoff for zero-norm degeneracies; the world scale is O(10).
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class Vec2:
    """A plane vector (world units)."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class WorldState:
    """Obstacle position ``h`` and robot position ``r``."""

    h: Vec2
    r: Vec2


@dataclass(frozen=True)
class ReducedState:
    """Symmetry-reduced coordinates ``(d, e, theta)``.

    d >= 0, e >= 0 and theta in [0, pi].  When d or e vanishes the angle is
    undefined; by convention it is stored as 0 (the stage cost does not
    depend on theta, so the convention is harmless and keeps everything
    continuous).
    """

    d: float
    e: float
    theta: float


@dataclass(frozen=True)
class CostParams:
    """Stage-cost parameters.

    lam trades target attraction against obstacle repulsion (1 = pure
    attraction), R is the shared collision/arrival radius, and epsilon
    regularises the repulsion term at zero distance.
    """

    lam: float
    R: float = 1.0
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.R <= 0.0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def step_full(s: WorldState, u: Vec2, w: Vec2) -> WorldState:
    """Advance the constant-position model one step: h += w, r += u."""
    return WorldState(h=s.h + w, r=s.r + u)


def incremental_cost(s: WorldState, t: Vec2, p: CostParams) -> float:
    """Per-step cost at state ``s``: zero inside the arrival disc, else
    lam*(e - R)^2 + (1 - lam)/(d + epsilon)."""
    e = (s.r - t).norm()
    if e <= p.R:
        return 0.0
    d = (s.h - s.r).norm()
    return p.lam * (e - p.R) ** 2 + (1.0 - p.lam) / (d + p.epsilon)


def reduced_cost(rs: ReducedState, p: CostParams) -> float:
    """The stage cost in reduced coordinates; agrees with
    :func:`incremental_cost` on any state reducing to ``rs``."""
    if rs.e <= p.R:
        return 0.0
    return p.lam * (rs.e - p.R) ** 2 + (1.0 - p.lam) / (rs.d + p.epsilon)


def moving_frame_angle(r: Vec2, t: Vec2) -> float:
    """Rotation angle (radians) sending ``r - t`` onto the positive x-axis.

    Rotating the scene about ``t`` by the returned angle puts the robot due
    east of the target at distance ``|r - t|``, i.e. onto the canonical
    cross-section.  Undefined for r == t.
    """
    v = r - t
    if v.x == 0.0 and v.y == 0.0:
        raise ValueError("moving frame undefined: robot coincides with target")
    return -math.atan2(v.y, v.x)


def rotate_about(p: Vec2, center: Vec2, beta: float) -> Vec2:
    """Rotate point ``p`` about ``center`` by ``beta`` radians."""
    c, s = math.cos(beta), math.sin(beta)
    v = p - center
    return Vec2(center.x + c * v.x - s * v.y, center.y + s * v.x + c * v.y)


def rotate_state(s: WorldState, t: Vec2, beta: float) -> WorldState:
    """Rotate both positions of ``s`` about the target."""
    return WorldState(h=rotate_about(s.h, t, beta), r=rotate_about(s.r, t, beta))


def reduce(s: WorldState, t: Vec2) -> ReducedState:
    """Map a full state to reduced coordinates.

    The arccos argument is clamped to [-1, 1]: |v.w| <= |v||w| can be
    violated by a few ulps in floating point.  Degenerate configurations
    (d or e below :data:`DEGENERACY_TOL`) get theta = 0.
    """
    rt = s.r - t
    hr = s.h - s.r
    d = hr.norm()
    e = rt.norm()
    if d < DEGENERACY_TOL or e < DEGENERACY_TOL:
        return ReducedState(d=d, e=e, theta=0.0)
    c = rt.dot(hr) / (d * e)
    theta = math.acos(max(-1.0, min(1.0, c)))
    return ReducedState(d=d, e=e, theta=theta)


def lift(rs: ReducedState, t: Vec2) -> WorldState:
    """Place reduced coordinates back on the canonical cross-section:
    robot due east of the target, obstacle at angle theta from the east
    direction.  Inverse of :func:`reduce` on that cross-section."""
    r = Vec2(t.x + rs.e, t.y)
    h = Vec2(r.x + rs.d * math.cos(rs.theta), r.y + rs.d * math.sin(rs.theta))
    return WorldState(h=h, r=r)


def step_reduced(rs: ReducedState, u: Vec2, w: Vec2) -> ReducedState:
    """Advance reduced coordinates one step.

    Equivalent to lifting onto the cross-section, stepping the full state,
    and reducing again (the consistency tests pin this).  nu is the next
    robot-to-target offset of the lifted state, xi the next robot-to-
    obstacle offset.
    """
    nu_x = rs.e + u.x
    nu_y = u.y
    xi_x = rs.d * math.cos(rs.theta) + w.x - u.x
    xi_y = rs.d * math.sin(rs.theta) + w.y - u.y
    e_next = math.hypot(nu_x, nu_y)
    d_next = math.hypot(xi_x, xi_y)
    if e_next < DEGENERACY_TOL or d_next < DEGENERACY_TOL:
        theta_next = 0.0
    else:
        c = (nu_x * xi_x + nu_y * xi_y) / (e_next * d_next)
        theta_next = math.acos(max(-1.0, min(1.0, c)))
    return ReducedState(d=d_next, e=e_next, theta=theta_next)


# ---------------------------------------------------------------------------
# Array kernels.  Same formulas as the scalar operations above, broadcast
# over numpy arrays; the solver and the rollout planner run on these.
# ---------------------------------------------------------------------------

def reduce_arrays(hx, hy, rx, ry, tx, ty):
    """Vectorised :func:`reduce`; returns (d, e, theta) arrays."""
    vx, vy = rx - tx, ry - ty
    gx, gy = hx - rx, hy - ry
    d = np.hypot(gx, gy)
    e = np.hypot(vx, vy)
    ok = (d >= DEGENERACY_TOL) & (e >= DEGENERACY_TOL)
    denom = np.where(ok, d * e, 1.0)
    c = np.clip((vx * gx + vy * gy) / denom, -1.0, 1.0)
    theta = np.where(ok, np.arccos(c), 0.0)
    return d, e, theta


def step_reduced_arrays(d, e, theta, ux, uy, wx, wy):
    """Vectorised :func:`step_reduced`; returns (d+, e+, theta+) arrays."""
    nu_x = e + ux
    nu_y = np.broadcast_to(np.asarray(uy, dtype=float), np.shape(nu_x))
    xi_x = d * np.cos(theta) + wx - ux
    xi_y = d * np.sin(theta) + wy - uy
    e_next = np.hypot(nu_x, nu_y)
    d_next = np.hypot(xi_x, xi_y)
    ok = (e_next >= DEGENERACY_TOL) & (d_next >= DEGENERACY_TOL)
    denom = np.where(ok, e_next * d_next, 1.0)
    c = np.clip((nu_x * xi_x + nu_y * xi_y) / denom, -1.0, 1.0)
    theta_next = np.where(ok, np.arccos(c), 0.0)
    return d_next, e_next, theta_next


def reduced_cost_arrays(d, e, p: CostParams):
    """Vectorised :func:`reduced_cost`."""
    active = np.asarray(e) > p.R
    return np.where(
        active,
        p.lam * (e - p.R) ** 2 + (1.0 - p.lam) / (d + p.epsilon),
        0.0,
    )
