"""Piecewise-constant fitted value iteration on the reduced state space.

The reduced space (d, e, theta) is partitioned into boxes; the value function
is approximated as one coefficient per box (indicator features collapse the
least-squares parameter update to a per-cell mean).  Each iteration performs
a Bellman value update at every sample point followed by that projection,
until the coefficient vector stops moving in the sup norm.

Cells are half-open [lo, hi) except the last interval along each axis, which
is closed: closed intervals sharing endpoints cannot be pairwise disjoint, so
the half-open convention resolves the partition at edges.  Coordinates above
the last edge clamp into the boundary cell; reachable states stay well inside
the grid range, so clamping only guards numerical stragglers.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .action_models import ActionSet, DisturbanceModel, Vec2, is_radially_symmetric
from .geometry import (
    CostParams,
    ReducedState,
    WorldState,
    reduce,
    reduced_cost_arrays,
    step_reduced_arrays,
)

# Next-state cell indices are cached across iterations when the table
# n_samples * |U| * |W| fits this many int32 entries (~256 MB).
_INDEX_CACHE_LIMIT = 64_000_000


@dataclass(frozen=True, eq=False)
class PartitionGrid:
    """Strictly increasing cell edges per axis; theta spans [0, pi]."""

    d_edges: np.ndarray
    e_edges: np.ndarray
    theta_edges: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "d_edges", np.asarray(self.d_edges, dtype=float))
        object.__setattr__(self, "e_edges", np.asarray(self.e_edges, dtype=float))
        object.__setattr__(
            self, "theta_edges", np.asarray(self.theta_edges, dtype=float)
        )
        for name, edges in (
            ("d_edges", self.d_edges),
            ("e_edges", self.e_edges),
            ("theta_edges", self.theta_edges),
        ):
            if len(edges) < 2:
                raise ValueError(f"{name} needs at least two edges")
            if not np.all(np.diff(edges) > 0):
                raise ValueError(f"{name} must be strictly increasing")
        if self.d_edges[0] != 0.0 or self.e_edges[0] != 0.0:
            raise ValueError("d_edges and e_edges must start at 0")
        if self.theta_edges[0] != 0.0 or abs(self.theta_edges[-1] - math.pi) > 1e-12:
            raise ValueError("theta_edges must span [0, pi]")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (
            len(self.d_edges) - 1,
            len(self.e_edges) - 1,
            len(self.theta_edges) - 1,
        )

    @property
    def num_cells(self) -> int:
        nd, ne, nt = self.shape
        return nd * ne * nt


def build_paper_grid() -> PartitionGrid:
    """The benchmark grid: fine spacing out to 3 world units, coarse to 30,
    uniform angle bins; 115 x 85 x 26 edges, 239,400 cells."""
    d_edges = np.concatenate([np.linspace(0.0, 3.0, 61), np.linspace(3.5, 30.0, 54)])
    e_edges = np.concatenate([np.linspace(0.0, 3.0, 31), np.linspace(3.5, 30.0, 54)])
    theta_edges = np.linspace(0.0, math.pi, 26)
    return PartitionGrid(d_edges=d_edges, e_edges=e_edges, theta_edges=theta_edges)


def _axis_indices(edges: np.ndarray, x) -> np.ndarray:
    idx = np.searchsorted(edges, x, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def _cell_indices(grid: PartitionGrid, d, e, theta) -> np.ndarray:
    """Vectorised flat cell index under the half-open convention."""
    nd, ne, nt = grid.shape
    j = _axis_indices(grid.d_edges, d)
    l = _axis_indices(grid.e_edges, e)
    m = _axis_indices(grid.theta_edges, theta)
    return (j * ne + l) * nt + m


def cell_index(grid: PartitionGrid, rs: ReducedState) -> int:
    """Flat index of the cell containing ``rs`` (0-based, d-major order).
    Out-of-range coordinates clamp to the nearest boundary cell."""
    return int(_cell_indices(grid, rs.d, rs.e, rs.theta))


@dataclass(frozen=True)
class SolverConfig:
    """Fitted-VI controls: samples per cell, stop tolerance, iteration cap,
    and the seed for the in-cell sample placement."""

    samples_per_cell: int = 1
    eps_tol: float = 1e-5
    max_iters: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples_per_cell < 1:
            raise ValueError("samples_per_cell must be >= 1")
        if self.eps_tol <= 0.0:
            raise ValueError("eps_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _cell_bounds(grid: PartitionGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (lo, hi) corners, flattened in cell-index order."""
    nd, ne, nt = grid.shape
    dl, dh = grid.d_edges[:-1], grid.d_edges[1:]
    el, eh = grid.e_edges[:-1], grid.e_edges[1:]
    tl, th = grid.theta_edges[:-1], grid.theta_edges[1:]
    lo = np.stack(
        [g.ravel() for g in np.meshgrid(dl, el, tl, indexing="ij")], axis=1
    )
    hi = np.stack(
        [g.ravel() for g in np.meshgrid(dh, eh, th, indexing="ij")], axis=1
    )
    return lo, hi


def _sample_grid(grid: PartitionGrid, cfg: SolverConfig) -> np.ndarray:
    """(num_cells * samples_per_cell, 3) sample array, ordered by cell index
    then sample slot.  Slot 0 is the cell centre; remaining slots are uniform
    in the cell from a stream seeded by (seed, cell index), so any one cell's
    samples are independent of grid traversal order."""
    lo, hi = _cell_bounds(grid)
    p = len(lo)
    spc = cfg.samples_per_cell
    out = np.empty((p * spc, 3), dtype=float)
    out[0::spc] = 0.5 * (lo + hi)
    if spc > 1:
        for i in range(p):
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence((cfg.seed, i)))
            )
            uni = rng.random((spc - 1, 3))
            out[i * spc + 1 : (i + 1) * spc] = lo[i] + uni * (hi[i] - lo[i])
    return out


def generate_samples(grid: PartitionGrid, cfg: SolverConfig) -> list[ReducedState]:
    """Sample states for the fitted solve; see :func:`_sample_grid`."""
    arr = _sample_grid(grid, cfg)
    return [ReducedState(d=row[0], e=row[1], theta=row[2]) for row in arr]


@dataclass(frozen=True, eq=False)
class ValueTable:
    """A solved (or in-progress) piecewise-constant value function."""

    grid: PartitionGrid
    coefficients: np.ndarray
    cost_params: CostParams
    n1: int
    n2: int
    disturbance: DisturbanceModel

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != self.grid.num_cells:
            raise ValueError(
                f"expected {self.grid.num_cells} coefficients, got {len(coeffs)}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        if np.any(coeffs < 0.0):
            raise ValueError("coefficients must be nonnegative")


def evaluate_reduced(table: ValueTable, rs: ReducedState) -> float:
    """Piecewise-constant lookup: the coefficient of the cell containing
    ``rs`` (the indicator-feature inner product collapses to one entry)."""
    return float(table.coefficients[cell_index(table.grid, rs)])


def evaluate_full(table: ValueTable, s: WorldState, t: Vec2) -> float:
    """Value of a full state via symmetry reduction."""
    return evaluate_reduced(table, reduce(s, t))


def evaluate_many(table: ValueTable, d, e, theta) -> np.ndarray:
    """Vectorised table lookup on coordinate arrays."""
    return table.coefficients[_cell_indices(table.grid, d, e, theta)]


def bellman_backup(sample: ReducedState, table: ValueTable, U: ActionSet) -> float:
    """One Bellman value update at ``sample`` against ``table``.

    Samples inside the arrival disc are terminal and cost-free, so the
    backup is 0 there.  Otherwise: stage cost plus the best (over actions,
    canonical order) expected continuation under the table's disturbance.
    """
    p = table.cost_params
    if sample.e <= p.R:
        return 0.0
    W = table.disturbance
    wx, wy = W.array().T
    probs = W.probs()
    stage = p.lam * (sample.e - p.R) ** 2 + (1.0 - p.lam) / (sample.d + p.epsilon)
    best = math.inf
    for u in U.actions:
        d_n, e_n, t_n = step_reduced_arrays(
            sample.d, sample.e, sample.theta, u.x, u.y, wx, wy
        )
        cont = float(probs @ table.coefficients[_cell_indices(table.grid, d_n, e_n, t_n)])
        if cont < best:
            best = cont
    return stage + best


def _fit_cell_means(
    cell_idx: np.ndarray, betas: np.ndarray, num_cells: int
) -> np.ndarray:
    counts = np.bincount(cell_idx, minlength=num_cells)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"cell {missing} contains no sample")
    sums = np.bincount(cell_idx, weights=betas, minlength=num_cells)
    return sums / counts


def fit_parameters(
    samples: list[ReducedState] | np.ndarray,
    betas,
    grid: PartitionGrid,
) -> np.ndarray:
    """Least-squares parameter update.

    With indicator features the normal equations decouple per cell, so the
    minimiser is the mean of ``betas`` over each cell's samples (accumulated
    in sample order).  Raises if any cell has no sample.
    """
    arr = _as_sample_array(samples)
    betas = np.asarray(betas, dtype=float)
    if len(arr) != len(betas):
        raise ValueError("samples and betas must have equal length")
    idx = _cell_indices(grid, arr[:, 0], arr[:, 1], arr[:, 2])
    return _fit_cell_means(idx, betas, grid.num_cells)


def _as_sample_array(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.asarray(samples, dtype=float)
    return np.array([[s.d, s.e, s.theta] for s in samples], dtype=float)


def _backup_all(
    a: np.ndarray,
    grid: PartitionGrid,
    stage: np.ndarray,
    terminal: np.ndarray,
    sample_arr: np.ndarray,
    U_arr: np.ndarray,
    W_arr: np.ndarray,
    probs: np.ndarray,
    idx_cache: np.ndarray | None,
) -> np.ndarray:
    """Vectorised value update over all samples (fixed reduction order)."""
    d, e, th = sample_arr[:, 0], sample_arr[:, 1], sample_arr[:, 2]
    best = None
    for iu, (ux, uy) in enumerate(U_arr):
        acc = np.zeros(len(sample_arr))
        for iw, (wx, wy) in enumerate(W_arr):
            if idx_cache is not None:
                idx = idx_cache[iu, iw]
            else:
                d_n, e_n, t_n = step_reduced_arrays(d, e, th, ux, uy, wx, wy)
                idx = _cell_indices(grid, d_n, e_n, t_n)
            acc += probs[iw] * a[idx]
        best = acc if best is None else np.minimum(best, acc)
    return np.where(terminal, 0.0, stage + best)


def solve(
    grid: PartitionGrid,
    p: CostParams,
    U: ActionSet,
    W: DisturbanceModel,
    cfg: SolverConfig,
    samples: list[ReducedState] | np.ndarray | None = None,
) -> tuple[ValueTable, list[float]]:
    """Run fitted value iteration to convergence (or the iteration cap).

    Starts from the zero coefficient vector; alternates the value update at
    every sample with the per-cell-mean projection, stopping when the
    sup-norm coefficient change drops to ``cfg.eps_tol`` or after
    ``cfg.max_iters`` updates.  Returns the table and the change history.

    The theory behind the reduction needs a radially symmetric disturbance;
    an asymmetric ``W`` only triggers a warning since the rollout layer is
    the sanctioned consumer for general disturbances.

    ``samples`` overrides the default per-cell placement (used by the
    lattice oracle, which samples exactly at realizable coordinates).
    """
    if not is_radially_symmetric(W, 1e-9):
        warnings.warn(
            "disturbance model is not radially symmetric; the reduced value "
            "function is only an approximation",
            stacklevel=2,
        )
    sample_arr = _sample_grid(grid, cfg) if samples is None else _as_sample_array(samples)
    d, e, th = sample_arr[:, 0], sample_arr[:, 1], sample_arr[:, 2]
    cell_of_sample = _cell_indices(grid, d, e, th)
    terminal = e <= p.R
    stage = np.asarray(reduced_cost_arrays(d, e, p), dtype=float)
    stage[terminal] = 0.0

    U_arr = U.array()
    W_arr = W.array()
    probs = W.probs()

    idx_cache = None
    if len(sample_arr) * len(U_arr) * len(W_arr) <= _INDEX_CACHE_LIMIT:
        idx_cache = np.empty(
            (len(U_arr), len(W_arr), len(sample_arr)), dtype=np.int32
        )
        for iu, (ux, uy) in enumerate(U_arr):
            for iw, (wx, wy) in enumerate(W_arr):
                d_n, e_n, t_n = step_reduced_arrays(d, e, th, ux, uy, wx, wy)
                idx_cache[iu, iw] = _cell_indices(grid, d_n, e_n, t_n)

    a = np.zeros(grid.num_cells)
    deltas: list[float] = []
    for _ in range(cfg.max_iters):
        betas = _backup_all(
            a, grid, stage, terminal, sample_arr, U_arr, W_arr, probs, idx_cache
        )
        a_next = _fit_cell_means(cell_of_sample, betas, grid.num_cells)
        delta = float(np.max(np.abs(a_next - a)))
        deltas.append(delta)
        a = a_next
        if delta <= cfg.eps_tol:
            break

    table = ValueTable(
        grid=grid,
        coefficients=a,
        cost_params=p,
        n1=U.n1,
        n2=(len(W) - 1) // 2,
        disturbance=W,
    )
    return table, deltas


# ---------------------------------------------------------------------------
# Table file format: one JSON document, floats at 17 significant digits so a
# write/read round trip is bit-faithful.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def _fmt_pairs(pairs) -> str:
    return "[" + ", ".join(f"[{_fmt(a)}, {_fmt(b)}]" for a, b in pairs) + "]"


def table_to_json(table: ValueTable) -> str:
    W = table.disturbance
    parts = [
        f'"lambda": {_fmt(table.cost_params.lam)}',
        f'"R": {_fmt(table.cost_params.R)}',
        f'"epsilon": {_fmt(table.cost_params.epsilon)}',
        f'"n1": {table.n1}',
        f'"n2": {table.n2}',
        '"disturbance": {"outcomes": '
        + _fmt_pairs((o.x, o.y) for o in W.outcomes)
        + ', "probabilities": '
        + _fmt_list(W.probabilities)
        + "}",
        f'"d_edges": {_fmt_list(table.grid.d_edges)}',
        f'"e_edges": {_fmt_list(table.grid.e_edges)}',
        f'"theta_edges": {_fmt_list(table.grid.theta_edges)}',
        f'"coefficients": {_fmt_list(table.coefficients)}',
    ]
    return "{\n" + ",\n".join(parts) + "\n}\n"


def write_table(table: ValueTable, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(table_to_json(table))


def read_table(path) -> ValueTable:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    try:
        grid = PartitionGrid(
            d_edges=np.array(doc["d_edges"], dtype=float),
            e_edges=np.array(doc["e_edges"], dtype=float),
            theta_edges=np.array(doc["theta_edges"], dtype=float),
        )
        disturbance = DisturbanceModel(
            outcomes=tuple(Vec2(float(x), float(y)) for x, y in doc["disturbance"]["outcomes"]),
            probabilities=tuple(float(p) for p in doc["disturbance"]["probabilities"]),
        )
        return ValueTable(
            grid=grid,
            coefficients=np.array(doc["coefficients"], dtype=float),
            cost_params=CostParams(
                lam=float(doc["lambda"]),
                R=float(doc["R"]),
                epsilon=float(doc["epsilon"]),
            ),
            n1=int(doc["n1"]),
            n2=int(doc["n2"]),
            disturbance=disturbance,
        )
    except KeyError as exc:
        raise ValueError(f"value table file missing field {exc}") from exc
