"""JSON run-configuration parsing with field-level diagnostics.

One JSON document drives one CLI command.  Every parse error names the
offending field so misconfigured runs fail fast and reproducibly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .action_models import (
    ActionSet,
    DisturbanceModel,
    build_action_set,
    build_disturbance_uniform,
    build_disturbance_weighted,
)
from .baselines import CbfParams
from .geometry import CostParams, Vec2
from .rollout import MODE_CE, MODE_EXPECTATION, ConstraintBox, RolloutConfig
from .value_solver import PartitionGrid, SolverConfig, build_paper_grid


class ConfigError(Exception):
    """Malformed configuration; the message names the field."""


def _get(obj: dict, key: str, kind, where: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"missing required field '{where}.{key}'")
        return default
    value = obj[key]
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{where}.{key}' is invalid: {exc}") from exc


def _vec2(value, where: str) -> Vec2:
    try:
        x, y = value
        return Vec2(float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{where}' must be a [x, y] pair: {exc}") from exc


def load_document(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def parse_cost(doc: dict) -> CostParams:
    obj = doc.get("cost", {})
    try:
        return CostParams(
            lam=_get(obj, "lambda", float, "cost", required=True),
            R=_get(obj, "R", float, "cost", default=1.0),
            epsilon=_get(obj, "epsilon", float, "cost", default=1e-8),
        )
    except ValueError as exc:
        raise ConfigError(f"field 'cost' is invalid: {exc}") from exc


def parse_actions(doc: dict) -> ActionSet:
    obj = doc.get("actions", {})
    n1 = _get(obj, "n1", int, "actions", default=16)
    try:
        return build_action_set(n1)
    except ValueError as exc:
        raise ConfigError(f"field 'actions.n1' is invalid: {exc}") from exc


def parse_disturbance(doc: dict, key: str = "disturbance") -> DisturbanceModel:
    obj = doc.get(key, {})
    kind = _get(obj, "kind", str, key, default="uniform")
    n2 = _get(obj, "n2", int, key, default=16)
    try:
        if kind == "uniform":
            return build_disturbance_uniform(n2)
        if kind == "weighted":
            return build_disturbance_weighted(
                n2,
                _get(obj, "high_weight", float, key, default=100.0),
                _get(obj, "low_weight", float, key, default=1.0),
            )
    except ValueError as exc:
        raise ConfigError(f"field '{key}' is invalid: {exc}") from exc
    raise ConfigError(f"field '{key}.kind' must be 'uniform' or 'weighted', got {kind!r}")


def parse_grid(doc: dict) -> PartitionGrid:
    obj = doc.get("grid", {"preset": "paper"})
    preset = obj.get("preset")
    if preset is not None:
        if preset != "paper":
            raise ConfigError(f"field 'grid.preset' must be 'paper', got {preset!r}")
        return build_paper_grid()
    try:
        if "d_edges" in obj:
            return PartitionGrid(
                d_edges=np.array(obj["d_edges"], dtype=float),
                e_edges=np.array(obj["e_edges"], dtype=float),
                theta_edges=np.array(obj["theta_edges"], dtype=float),
            )
        n_d = _get(obj, "n_d", int, "grid", required=True)
        n_e = _get(obj, "n_e", int, "grid", required=True)
        n_theta = _get(obj, "n_theta", int, "grid", required=True)
        d_max = _get(obj, "d_max", float, "grid", default=30.0)
        e_max = _get(obj, "e_max", float, "grid", default=30.0)
        return PartitionGrid(
            d_edges=np.linspace(0.0, d_max, n_d),
            e_edges=np.linspace(0.0, e_max, n_e),
            theta_edges=np.linspace(0.0, math.pi, n_theta),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"field 'grid' is invalid: {exc}") from exc


def parse_solver(doc: dict, seed_override: int | None = None) -> SolverConfig:
    obj = doc.get("solver", {})
    seed = _get(obj, "seed", int, "solver", default=0)
    if seed_override is not None:
        seed = seed_override
    try:
        return SolverConfig(
            samples_per_cell=_get(obj, "samples_per_cell", int, "solver", default=3),
            eps_tol=_get(obj, "eps_tol", float, "solver", default=1e-5),
            max_iters=_get(obj, "max_iters", int, "solver", default=20),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"field 'solver' is invalid: {exc}") from exc


def parse_rollout(doc: dict, seed_override: int | None = None) -> RolloutConfig:
    obj = doc.get("rollout", {})
    mode = _get(obj, "mode", str, "rollout", default=MODE_EXPECTATION)
    if mode not in (MODE_EXPECTATION, MODE_CE):
        raise ConfigError(
            f"field 'rollout.mode' must be '{MODE_EXPECTATION}' or '{MODE_CE}', got {mode!r}"
        )
    seed = _get(obj, "seed", int, "rollout", default=0)
    if seed_override is not None:
        seed = seed_override
    try:
        return RolloutConfig(
            horizon=_get(obj, "horizon", int, "rollout", default=2),
            mode=mode,
            scenario_count=_get(obj, "scenarios", int, "rollout", default=64),
            infeasibility_penalty=_get(
                obj, "infeasibility_penalty", float, "rollout", default=1e9
            ),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"field 'rollout' is invalid: {exc}") from exc


def parse_box(doc: dict) -> ConstraintBox:
    obj = doc.get("box", {"lo": [0.0, 0.0], "hi": [20.0, 20.0]})
    try:
        return ConstraintBox(
            lo=_vec2(obj.get("lo", [0.0, 0.0]), "box.lo"),
            hi=_vec2(obj.get("hi", [20.0, 20.0]), "box.hi"),
        )
    except ValueError as exc:
        raise ConfigError(f"field 'box' is invalid: {exc}") from exc


@dataclass(frozen=True)
class EvaluationSpec:
    instances: int
    realizations: int
    max_steps: int
    seed: int
    lambdas: tuple[float, ...]
    horizons: tuple[int, ...]
    modes: tuple[str, ...]
    baselines: tuple[tuple[str, CbfParams | None], ...]


def parse_evaluation(doc: dict, seed_override: int | None = None) -> EvaluationSpec:
    obj = doc.get("evaluation", {})
    seed = _get(obj, "seed", int, "evaluation", default=0)
    if seed_override is not None:
        seed = seed_override
    modes = tuple(obj.get("modes", [MODE_EXPECTATION]))
    for m in modes:
        if m not in (MODE_EXPECTATION, MODE_CE):
            raise ConfigError(f"field 'evaluation.modes' contains unknown mode {m!r}")
    baselines = []
    for i, b in enumerate(obj.get("baselines", [])):
        name = b.get("planner")
        if name == "astar":
            baselines.append(("astar", None))
        elif name in ("cbf", "cbf_ce"):
            try:
                prm = CbfParams(
                    alpha=float(b.get("alpha", 0.75)), d0=float(b.get("d0", 1.0))
                )
            except ValueError as exc:
                raise ConfigError(
                    f"field 'evaluation.baselines[{i}]' is invalid: {exc}"
                ) from exc
            baselines.append((name, prm))
        else:
            raise ConfigError(
                f"field 'evaluation.baselines[{i}].planner' must be astar|cbf|cbf_ce, got {name!r}"
            )
    return EvaluationSpec(
        instances=_get(obj, "instances", int, "evaluation", default=50),
        realizations=_get(obj, "realizations", int, "evaluation", default=10),
        max_steps=_get(obj, "max_steps", int, "evaluation", default=500),
        seed=seed,
        lambdas=tuple(float(x) for x in obj.get("lambdas", [])),
        horizons=tuple(int(x) for x in obj.get("horizons", [1])),
        modes=modes,
        baselines=tuple(baselines),
    )


@dataclass(frozen=True)
class SimulateSpec:
    planner: str
    t: Vec2
    r0: Vec2
    h0: Vec2
    realizations: int
    max_steps: int
    seed: int
    cbf: CbfParams | None = None


def parse_simulate(doc: dict, seed_override: int | None = None) -> SimulateSpec:
    obj = doc.get("simulate", {})
    planner = _get(obj, "planner", str, "simulate", default="rollout")
    if planner not in ("rollout", "astar", "cbf", "cbf_ce", "nominal"):
        raise ConfigError(
            f"field 'simulate.planner' must be rollout|astar|cbf|cbf_ce|nominal, got {planner!r}"
        )
    seed = _get(obj, "seed", int, "simulate", default=0)
    if seed_override is not None:
        seed = seed_override
    cbf = None
    if planner in ("cbf", "cbf_ce"):
        try:
            cbf = CbfParams(
                alpha=float(obj.get("alpha", 0.75)), d0=float(obj.get("d0", 1.0))
            )
        except ValueError as exc:
            raise ConfigError(f"field 'simulate' is invalid: {exc}") from exc
    return SimulateSpec(
        planner=planner,
        t=_vec2(obj.get("t", [4.0, 3.0]), "simulate.t"),
        r0=_vec2(obj.get("r0", [4.0, 12.0]), "simulate.r0"),
        h0=_vec2(obj.get("h0", [2.0, 6.0]), "simulate.h0"),
        realizations=_get(obj, "realizations", int, "simulate", default=100),
        max_steps=_get(obj, "max_steps", int, "simulate", default=500),
        seed=seed,
    )
