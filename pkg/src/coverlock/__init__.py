"""Treatment allocation under a budget and a minimum-coverage floor."""
__version__ = "0.1.0"

from .analysis import (
    MisallocationReport,
    ScoredUnits,
    compare_policies,
    crossing_cost,
    lp_boundary,
    margin_band_check,
    misallocation_area,
    rc_threshold,
    welfare_loss_and_bound,
)
from .core import (
    BinaryAllocation,
    DualPrices,
    FractionalAllocation,
    ProblemInstance,
    SolveReport,
    allocation_metrics,
    is_instance_feasible,
    lagrangian_score,
    threshold_policy,
    validate_instance,
)
from .estimators import ExactAllocator, GLCAllocator, LPAllocator, RankAndCutAllocator
from .exact import solve_exact, solve_exhaustive
from .exceptions import *  # noqa: F401,F403
from .experiments import Dgp1Config, Dgp2Config, dgp1_sample, dgp2_sample, run_mc1, run_mc2
from .glc import GlcConfig, glc_select_at_lambda, glc_solve
from .lp import enumerate_extreme_points_oracle, integrality_gap, round_lp_to_feasible, solve_lp
from .rc import rank_by_ratio, rc_greedy_skip_solve, rc_prefix_solve, rc_with_target_count
