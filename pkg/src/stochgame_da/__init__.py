"""Decentralised learning in average-reward stochastic games with independent chains."""

from .errors import (BatchCapExceeded, ConfigError, DeltaSearchFailed, EmptyShrunkPolytope,
                     EnumerationTooLarge, GameInputError, InfeasibleLP, LPError, NonErgodic,
                     ProjectionError)
from .game import (GameConfig, PlayerChain, SmartGridReward, TabularReward, game_from_spec,
                   random_game, simulate, smart_grid_game, step, zero_sum_two_player)
from .learner import Learner, Schedule, auto_burn_in, run, run_batch, step_size
from .lp import solve_lp
from .metrics import (averaged_ni_gap, best_response_value, check_constant_sum,
                      estimator_bias_report, exact_gradient, ni_gap, stable_residual)
from .occupancy import (build_polytope, compute_delta, fraction_delta, mixing_time_bound,
                        occupation_from_policy, policy_from_occupation, shrink,
                        stationary_distribution)
from .projection import Regularizer, da_argmax, euclidean_project, kl_project, kl_simplex_step

__version__ = "0.1.0"
