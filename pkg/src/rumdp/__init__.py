"""Nondominated policies and minimax regret for MDPs with uncertain rewards."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExceededError,
    InvalidInstanceError,
    LpNumericalError,
    MalformedFileError,
    PreconditionError,
    RumdpError,
)
from .instances import GenConfig, RumdpInstance, generate, load, save  # noqa: E402
from .mdp import Mdp, evaluate_policy, occupancy_of, solve_optimal  # noqa: E402
from .nondominated import (  # noqa: E402
    EnumerationBudget,
    NondominatedSet,
    brute_force_nondominated,
    enumerate_approx_gt,
    enumerate_gt,
    enumerate_pi_witness,
)
from .regret import evaluate_regret, solve_icg_nd, solve_xu_mannor  # noqa: E402
from .rewards import RewardPolytope, box_polytope  # noqa: E402

__all__ = [
    "BudgetExceededError",
    "EnumerationBudget",
    "GenConfig",
    "InvalidInstanceError",
    "LpNumericalError",
    "MalformedFileError",
    "Mdp",
    "NondominatedSet",
    "PreconditionError",
    "RewardPolytope",
    "RumdpError",
    "RumdpInstance",
    "box_polytope",
    "brute_force_nondominated",
    "enumerate_approx_gt",
    "enumerate_gt",
    "enumerate_pi_witness",
    "evaluate_policy",
    "evaluate_regret",
    "generate",
    "load",
    "occupancy_of",
    "save",
    "solve_icg_nd",
    "solve_optimal",
    "solve_xu_mannor",
]
