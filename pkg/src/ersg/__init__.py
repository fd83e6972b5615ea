"""Entropy-regularized zero-sum stochastic games."""

from .discounted import DiscountedSolution, shapley_apply, solve_discounted
from .errors import (
    ConvergenceError,
    EnumerationLimitError,
    InvalidGameError,
    NumericRangeError,
    OneShotError,
    TransferError,
)
from .evaluate import (
    best_response_value,
    exploitability,
    phi_inf,
    phi_n,
    phi_n_tree,
    rollout_occupancy,
    win_probability,
)
from .game_model import (
    Game,
    HistoryStrategy,
    MarkovStrategy,
    RegularizationConfig,
    StationaryStrategy,
    load_game,
    save_game,
    validate_game,
)
from .gridworld import GridMap, ProductGame, build_game, builtin_map, load_map, transfer_strategy
from .matrix_lp import solve_matrix_lp
from .nstage import NStageSolution, solve_nstage
from .oneshot import OneShotProblem, OneShotSolution, solve

__all__ = [
    "ConvergenceError", "DiscountedSolution", "EnumerationLimitError", "Game", "GridMap",
    "HistoryStrategy", "InvalidGameError", "MarkovStrategy", "NStageSolution", "NumericRangeError",
    "OneShotError", "OneShotProblem", "OneShotSolution", "ProductGame", "RegularizationConfig",
    "StationaryStrategy", "TransferError", "best_response_value", "build_game", "builtin_map",
    "exploitability", "load_game", "load_map", "phi_inf", "phi_n", "phi_n_tree", "rollout_occupancy",
    "save_game", "shapley_apply", "solve", "solve_discounted", "solve_matrix_lp", "solve_nstage",
    "transfer_strategy", "validate_game", "win_probability",
]
