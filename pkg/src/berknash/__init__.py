"""Berk-Nash equilibria, optimal contracts, and learning dynamics for
principal-agent problems with misspecified agents."""

from .model import (
    ActionSpace,
    Belief,
    Contract,
    ContractInstance,
    GenericReport,
    InstanceError,
    KLProfile,
    RewardSpace,
    agent_utility,
    check_generic,
    expected_kl,
    kl_divergence,
    kl_profile,
    kl_profile_matrix,
    misspecification_level,
    principal_revenue,
    validate_contract,
    validate_instance,
    zero_contract,
)
from .lp import LinearProgram, LPError, LPSolution, solve_lp
from .equilibrium import (
    BerkNashCertificate,
    BreakPointDiagram,
    EquilibriumError,
    best_consistent_posterior,
    best_response_set,
    break_points,
    find_equilibria_grid,
    min_kl_beliefs,
    mixing_point,
    verify_berk_nash,
)
from .contract import (
    ActionRange,
    ContractRegion,
    SolveReport,
    SupportCandidate,
    action_range,
    brute_force_optimal_contract,
    contract_region,
    optimal_contract,
    solve_support,
    solver_epsilon,
)
from .learning import (
    LogPosterior,
    SimulationError,
    Trajectory,
    choose_action,
    cycle_stats,
    posterior_update,
    restrict_prior,
    simulate,
)
from .scenarios import (
    GameMatrices,
    ReductionOutput,
    UnhappyParams,
    game_to_contract,
    make_divergence_instance,
    make_unhappy_principal,
    round_game,
    unhappy_bounds,
    verify_reduction,
)

__version__ = "0.1.0"
