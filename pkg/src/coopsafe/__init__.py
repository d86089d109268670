"""Pairwise reachability plus a mixed-integer coordination layer for multi-vehicle collision avoidance."""

from .grid_hj import (Grid3, OutOfGridError, RelDynParams, ValueField, hamiltonian, sample_gradient,
                      sample_value, signed_distance_cylinder, solve_brs)
from .pairwise import (RelativeState, common_control_sets, optimal_avoid_control,
                       potential_conflict_set, relative_state, safety_level)
from .coordination import (NEG_INF, MipInstance, RewardMatrix, baseline_assignment,
                           build_reward_matrix, priority_matrix, samv_modify, solve_mip,
                           verify_theorem1, verify_theorem2)
from .simulator import (Method, Scenario, VehicleState, batch_run, decide_controls,
                        liveness_control, random_scenario, run_scenario, step)
from .persistence import RunConfig, load_brs, save_brs

__version__ = "0.1.0"
