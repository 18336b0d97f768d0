"""Pairwise reachability values, CBVF safety filters and prioritised multi-agent episodes."""

from .cbvf_filter import Barrier, FilterOutcome, barrier_constraint_lhs, filter_cooperative, filter_noncooperative
from .coordination import (
    ConflictReport,
    NeighborAssessment,
    assess_neighbors,
    check_conflict_free,
    compute_conflict_radius,
    conflict_penalty,
    detect_collision_pairs,
    penalty_alternatives,
    select_priority,
)
from .dynamics import (
    ActionBounds,
    DynamicsKind,
    RelativeModel,
    default_params,
    relative_flow,
    relative_state,
    step,
)
from .fieldio import load_field, save_field
from .grid import FieldKind, GridSpec, ValueField, default_grid, gradient, interpolate
from .hj_solver import SolveSettings, solve_cooperative_value, solve_time_to_reach, solve_worstcase_value
from .metrics import SafetyMetrics, compute_metrics
from .scenarios import ScenarioConfig, build_scenario
from .simulator import EpisodeTrace, run_episode

__version__ = "0.1.0"
