"""Matplotlib figure rendering for solver and evaluation outputs.

Every report-producing CLI command writes these figures next to its
delimited output.  Rendering is deterministic (fixed sizes, no timestamps)
and uses the Agg backend so it works headless.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import TradeOffPoint
from .geometry import Vec2
from .rollout import EpisodeResult

_PNG_KWARGS = dict(dpi=150, metadata={"Software": None})


def save_delta_plot(deltas: Sequence[float], path) -> None:
    """Sup-norm coefficient change per iteration, log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(range(len(deltas)), deltas, marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\|a_{k+1} - a_k\|_\infty$")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_PNG_KWARGS)
    plt.close(fig)


def save_tradeoff_plot(points: Sequence[TradeOffPoint], path) -> None:
    """Pareto-style trade-off: expected time vs. negated expected minimum
    obstacle distance, one series per (planner, horizon, mode).  Negating
    the distance makes both axes minimisation, so closer to the origin is
    better."""
    fig, ax = plt.subplots(figsize=(7, 5))
    series: dict[str, list[TradeOffPoint]] = {}
    for pt in points:
        if pt.planner == "rollout":
            label = f"rollout N={pt.horizon} ({pt.mode})"
        elif pt.alpha is not None:
            label = f"{pt.planner} (a={pt.alpha:g}, d0={pt.d0:g})"
        else:
            label = pt.planner
        series.setdefault(label, []).append(pt)
    for label, pts in series.items():
        xs = [p.mean_time for p in pts]
        ys = [-p.mean_min_distance for p in pts]
        if len(pts) > 1:
            order = np.argsort(xs)
            ax.plot(
                np.array(xs)[order], np.array(ys)[order], marker="o", label=label
            )
        else:
            ax.scatter(xs, ys, marker="s", label=label)
    ax.set_xlabel("expected time to target [steps]")
    ax.set_ylabel("negative expected min obstacle distance")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_PNG_KWARGS)
    plt.close(fig)


def save_trajectory_plot(result: EpisodeResult, t: Vec2, path) -> None:
    """Robot and obstacle trajectories with start markers and target disc."""
    rx = [s.r.x for s in result.trajectory]
    ry = [s.r.y for s in result.trajectory]
    hx = [s.h.x for s in result.trajectory]
    hy = [s.h.y for s in result.trajectory]
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(rx, ry, "-o", markersize=3, label="robot")
    ax.plot(hx, hy, "-s", markersize=3, label="obstacle")
    ax.scatter([rx[0]], [ry[0]], c="tab:blue", marker="*", s=160, zorder=5)
    ax.scatter([hx[0]], [hy[0]], c="tab:orange", marker="*", s=160, zorder=5)
    ax.scatter([t.x], [t.y], c="tab:green", marker="X", s=120, label="target", zorder=5)
    ax.add_patch(plt.Circle((t.x, t.y), 1.0, fill=False, linestyle="--", color="tab:green"))
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_PNG_KWARGS)
    plt.close(fig)


def save_distance_plot(result: EpisodeResult, t: Vec2, path) -> None:
    """Distance to target and to the obstacle over time."""
    steps = [s.step for s in result.trajectory]
    to_target = [(s.r - t).norm() for s in result.trajectory]
    to_obstacle = [(s.h - s.r).norm() for s in result.trajectory]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, to_target, label="robot-target")
    ax.plot(steps, to_obstacle, label="robot-obstacle")
    ax.set_xlabel("step")
    ax.set_ylabel("distance")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_PNG_KWARGS)
    plt.close(fig)
