"""Symmetry-reduced stochastic shortest-path planning toolkit."""

from .action_models import (
    ActionSet,
    DisturbanceModel,
    build_action_set,
    build_disturbance_point_mass,
    build_disturbance_uniform,
    build_disturbance_weighted,
    is_radially_symmetric,
    mean_disturbance,
)
from .baselines import CbfParams, astar_control, cbf_control, nominal_control
from .evaluation import (
    InstanceSpec,
    TradeOffPoint,
    evaluate_baseline,
    evaluate_lambda,
    sample_instances,
    tradeoff_sweep,
)
from .geometry import (
    CostParams,
    ReducedState,
    Vec2,
    WorldState,
    incremental_cost,
    lift,
    moving_frame_angle,
    reduce,
    reduced_cost,
    step_full,
    step_reduced,
)
from .rollout import (
    ConstraintBox,
    EpisodeResult,
    RolloutConfig,
    plan,
    simulate_episode,
)
from .value_solver import (
    PartitionGrid,
    SolverConfig,
    ValueTable,
    bellman_backup,
    build_paper_grid,
    cell_index,
    evaluate_full,
    evaluate_reduced,
    fit_parameters,
    generate_samples,
    read_table,
    solve,
    write_table,
)

__version__ = "0.1.0"
