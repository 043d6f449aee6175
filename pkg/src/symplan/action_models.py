"""Finite control and disturbance sets over the unit circle.

Both the robot and the obstacle move by unit steps in one of 2*n directions
(angles q*pi/n) or stand still.  The canonical ordering -- directions by
increasing angle, zero move last -- is the tie-breaking order used by every
argmin in the toolkit, so planners are deterministic and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Vec2

# Components this close to an exact 0/+-1 are snapped so that small n yields
# exact lattice moves (cos(pi/2) evaluates to ~6e-17, not 0).
_TRIG_SNAP = 1e-15


def _unit_directions(n: int) -> list[Vec2]:
    out = []
    for q in range(2 * n):
        a = math.pi * q / n
        c, s = math.cos(a), math.sin(a)
        if abs(c) < _TRIG_SNAP:
            c = 0.0
        elif abs(abs(c) - 1.0) < _TRIG_SNAP:
            c = math.copysign(1.0, c)
        if abs(s) < _TRIG_SNAP:
            s = 0.0
        elif abs(abs(s) - 1.0) < _TRIG_SNAP:
            s = math.copysign(1.0, s)
        out.append(Vec2(c, s))
    return out


@dataclass(frozen=True)
class ActionSet:
    """2*n1 unit moves in canonical angle order, then the zero move."""

    actions: tuple[Vec2, ...]
    n1: int

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def zero_index(self) -> int:
        return 2 * self.n1

    def array(self) -> np.ndarray:
        return np.array([[a.x, a.y] for a in self.actions], dtype=float)


@dataclass(frozen=True)
class DisturbanceModel:
    """Finite obstacle-move distribution.

    The standard layout matches :class:`ActionSet`: 2*n2 unit directions then
    the zero move, with one probability per outcome.  Custom layouts (e.g. a
    point mass on an arbitrary vector) are allowed; only the constructors
    below guarantee the standard layout.
    """

    outcomes: tuple[Vec2, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.outcomes) != len(self.probabilities):
            raise ValueError("outcomes and probabilities must have equal length")
        if any(p < 0.0 for p in self.probabilities):
            raise ValueError("probabilities must be nonnegative")
        total = sum(self.probabilities)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")

    def __len__(self) -> int:
        return len(self.outcomes)

    def array(self) -> np.ndarray:
        return np.array([[o.x, o.y] for o in self.outcomes], dtype=float)

    def probs(self) -> np.ndarray:
        return np.array(self.probabilities, dtype=float)


def build_action_set(n1: int) -> ActionSet:
    """Construct the canonical control set of cardinality 2*n1 + 1."""
    if n1 < 1:
        raise ValueError(f"n1 must be a positive integer, got {n1}")
    dirs = _unit_directions(n1)
    return ActionSet(actions=tuple(dirs) + (Vec2(0.0, 0.0),), n1=n1)


def build_disturbance_uniform(n2: int) -> DisturbanceModel:
    """All 2*n2 + 1 outcomes equally likely (radially symmetric)."""
    if n2 < 1:
        raise ValueError(f"n2 must be a positive integer, got {n2}")
    k = 2 * n2 + 1
    dirs = _unit_directions(n2)
    return DisturbanceModel(
        outcomes=tuple(dirs) + (Vec2(0.0, 0.0),),
        probabilities=(1.0 / k,) * k,
    )


def build_disturbance_weighted(
    n2: int, high_weight: float, low_weight: float
) -> DisturbanceModel:
    """Directional bias: outcomes with both components strictly positive get
    ``high_weight``, everything else ``low_weight``; weights are normalised.

    Strictness is evaluated on the snapped components, so the axis directions
    (angles 0 and pi/2) fall in the low-weight group.
    """
    if high_weight <= 0.0 or low_weight <= 0.0:
        raise ValueError("weights must be positive")
    if n2 < 1:
        raise ValueError(f"n2 must be a positive integer, got {n2}")
    dirs = _unit_directions(n2) + [Vec2(0.0, 0.0)]
    weights = [high_weight if (o.x > 0.0 and o.y > 0.0) else low_weight for o in dirs]
    total = sum(weights)
    return DisturbanceModel(
        outcomes=tuple(dirs), probabilities=tuple(w / total for w in weights)
    )


def build_disturbance_point_mass(v: Vec2 = Vec2(0.0, 0.0)) -> DisturbanceModel:
    """Deterministic obstacle motion: probability one on a single move."""
    return DisturbanceModel(outcomes=(v,), probabilities=(1.0,))


def mean_disturbance(m: DisturbanceModel) -> Vec2:
    """Probability-weighted mean outcome."""
    mx = sum(p * o.x for o, p in zip(m.outcomes, m.probabilities))
    my = sum(p * o.y for o, p in zip(m.outcomes, m.probabilities))
    return Vec2(mx, my)


def is_radially_symmetric(m: DisturbanceModel, tol: float) -> bool:
    """True iff all unit-magnitude outcomes carry equal probability within
    ``tol``.  The zero move may have any mass."""
    unit_probs = [
        p
        for o, p in zip(m.outcomes, m.probabilities)
        if abs(math.hypot(o.x, o.y) - 1.0) <= 1e-12
    ]
    if not unit_probs:
        return True
    return max(unit_probs) - min(unit_probs) <= tol
