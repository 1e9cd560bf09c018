"""Operation handlers shared by the HTTP service and the command-line client.

Each handler takes plain JSON-ready inputs and returns plain JSON-ready
dictionaries; infinities are mapped to None on the wire (the accompanying
flags carry the verdicts).
"""
from __future__ import annotations

import math

import numpy as np

from ..contract import ContractSolverError, optimal_contract, solver_epsilon
from ..equilibrium import (
    EquilibriumError,
    best_consistent_posterior,
    break_points,
    find_equilibria_grid,
    verify_berk_nash,
)
from ..learning import SimulationError, Trajectory, cycle_stats, simulate
from ..model import (
    InstanceError,
    kl_profile,
    misspecification_level,
    validate_contract,
    validate_instance,
)
from ..scenarios import (
    GameMatrices,
    ScenarioError,
    UnhappyParams,
    game_to_contract,
    make_divergence_instance,
    make_unhappy_principal,
    unhappy_bounds,
    verify_reduction,
)

DOMAIN_ERRORS = (
    InstanceError,
    ScenarioError,
    SimulationError,
    EquilibriumError,
    ContractSolverError,
)


def _finite_or_none(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


def handle_validate(instance_raw: dict) -> dict:
    inst = validate_instance(instance_raw)
    return {
        "instance": inst.to_dict(),
        "n_actions": inst.n_actions,
        "n_rewards": inst.n_rewards,
        "n_beliefs": inst.n_beliefs,
        "misspecification_level": _finite_or_none(misspecification_level(inst)),
    }


def handle_kl(instance_raw: dict) -> dict:
    inst = validate_instance(instance_raw)
    profiles = []
    for k in range(inst.n_beliefs):
        prof = kl_profile(inst, k)
        profiles.append(
            {
                "belief": prof.belief_name,
                "kl_by_action": [_finite_or_none(v) for v in prof.kl_by_action],
                "infinite": [bool(np.isinf(v)) for v in prof.kl_by_action],
            }
        )
    return {
        "profiles": profiles,
        "misspecification_level": _finite_or_none(misspecification_level(inst)),
    }


def handle_breakpoints(instance_raw: dict, contract_raw=None) -> dict:
    inst = validate_instance(instance_raw)
    contract = None
    if contract_raw is not None:
        contract = validate_contract(contract_raw, inst.n_rewards)
    return break_points(inst, contract).to_dict()


def handle_equilibria(
    instance_raw: dict, contract_raw, grid_n: int = 10_000, epsilon: float = 1e-6
) -> dict:
    inst = validate_instance(instance_raw)
    contract = validate_contract(contract_raw, inst.n_rewards)
    certs = find_equilibria_grid(inst, contract, grid_n=grid_n, epsilon=epsilon)
    return {"certificates": [c.to_dict() for c in certs], "count": len(certs)}


def handle_solve(instance_raw: dict, epsilon=None, max_workers=None) -> dict:
    inst = validate_instance(instance_raw)
    report = optimal_contract(inst, epsilon=epsilon, max_workers=max_workers)
    return {"report": report.to_dict()}


def run_simulation(instance_raw: dict, contract_raw, horizon: int, seed: int) -> Trajectory:
    inst = validate_instance(instance_raw)
    contract = validate_contract(contract_raw, inst.n_rewards)
    return simulate(inst, contract, horizon, seed)


def summarize_trajectory(instance_raw: dict, contract_raw, traj: Trajectory) -> dict:
    """JSON summary: switch times, cycle stats (when defined), and the
    equilibrium certificate of the final empirical frequency."""
    inst = validate_instance(instance_raw)
    contract = validate_contract(contract_raw, inst.n_rewards)
    try:
        stats = [s.to_dict() for s in cycle_stats(traj)]
    except SimulationError:
        stats = None
    certificate = None
    if inst.n_actions == 2:
        alpha = traj.final_freq()
        mu = best_consistent_posterior(inst, contract, alpha)
        cert = verify_berk_nash(inst, contract, alpha, mu, epsilon=solver_epsilon(inst))
        certificate = cert.to_dict()
        certificate["consistency_residual"] = _finite_or_none(cert.consistency_residual)
    return {
        "seed": traj.seed,
        "horizon": traj.horizon,
        "rng_algorithm": traj.rng_algorithm,
        "final_freq": traj.final_freq().tolist(),
        "switch_times": traj.switch_times.tolist(),
        "cycle_stats": stats,
        "certificate": certificate,
    }


def handle_simulate(instance_raw: dict, contract_raw, horizon: int, seed: int) -> dict:
    traj = run_simulation(instance_raw, contract_raw, horizon, seed)
    return summarize_trajectory(instance_raw, contract_raw, traj)


def handle_scenario_unhappy(p: float, c: float, delta: float, correct: bool = False) -> dict:
    params = UnhappyParams(p=p, c=c, delta=delta)
    inst = make_unhappy_principal(params, "correctly" if correct else "misspecified")
    correct_rev, misspec_rev, ratio = unhappy_bounds(params)
    return {
        "instance": inst.to_dict(),
        "contract": None,
        "bounds": {
            "correct_revenue": correct_rev,
            "misspec_revenue": misspec_rev,
            "gap_ratio": ratio,
        },
    }


def handle_scenario_divergence() -> dict:
    inst, contract = make_divergence_instance()
    return {"instance": inst.to_dict(), "contract": contract.to_list(), "bounds": None}


def handle_reduce(y, z, eps_prime: float) -> dict:
    tilde = GameMatrices(y=np.asarray(y, dtype=float), z=np.asarray(z, dtype=float))
    out = game_to_contract(tilde, eps_prime)
    report = verify_reduction(out, tilde, eps_prime)
    return {"reduction": out.to_dict(), "verification": report.to_dict()}
