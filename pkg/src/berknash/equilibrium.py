"""Berk-Nash equilibrium machinery.

KL-minimizing belief sets, the best-response correspondence, break points of
the two-action belief diagram, certificate verification, and a grid-based
equilibrium finder that doubles as a brute-force oracle for the contract
solver.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    Contract,
    ContractInstance,
    check_distribution,
    check_generic,
    kl_profile_matrix,
    zero_contract,
)

MIN_KL_TOL = 1e-9        # relative tie tolerance for "jointly minimal"
INDIFFERENCE_TOL = 1e-9  # utility-gap tolerance for multi-valued best response
CONSISTENCY_TOL = 1e-7   # certificate consistency-residual tolerance


class EquilibriumError(RuntimeError):
    """No belief can rationalize the requested object (e.g. all-infinite KL)."""


class NonGenericWarning(UserWarning):
    """The instance violates the genericity assumption; results are best-effort."""


@dataclass(frozen=True)
class BerkNashCertificate:
    """An (alpha, mu) pair with residuals witnessing optimality and consistency."""

    alpha: np.ndarray
    mu: np.ndarray
    optimality_residual: float
    consistency_residual: float
    epsilon: float
    valid: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "mu": self.mu.tolist(),
            "optimality_residual": self.optimality_residual,
            "consistency_residual": self.consistency_residual,
            "epsilon": self.epsilon,
            "valid": self.valid,
        }


@dataclass(frozen=True)
class BreakPointDiagram:
    """Break points of alpha(a1) in [0, 1] and the best-response action between them."""

    break_points: np.ndarray
    region_actions: tuple[int, ...]
    reliable: bool
    warnings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "break_points": self.break_points.tolist(),
            "region_actions": list(self.region_actions),
            "reliable": self.reliable,
            "warnings": list(self.warnings),
        }


def expected_kls(profiles: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Alpha-weighted KL per belief from a (n_beliefs, n_actions) profile matrix.

    Actions with alpha = 0 contribute nothing even against infinite entries.
    """
    masked = np.where(alpha[None, :] > 0, profiles, 0.0)
    return masked @ alpha


def utility_matrix(inst: ContractInstance, contract: Contract) -> np.ndarray:
    """V(a, B, P) for all actions x beliefs, shape (n_actions, n_beliefs)."""
    pays = np.array([b.dists @ contract.payments for b in inst.beliefs])  # (nB, nA)
    return pays.T - inst.actions.costs[:, None]


def _min_kl_from_profiles(profiles: np.ndarray, alpha: np.ndarray, tol: float) -> list[int]:
    ekls = expected_kls(profiles, alpha)
    finite = np.isfinite(ekls)
    if not np.any(finite):
        raise EquilibriumError("every belief has infinite expected KL divergence")
    best = float(np.min(ekls[finite]))
    cutoff = best + tol * max(1.0, abs(best))
    return [k for k in range(len(ekls)) if ekls[k] <= cutoff]


def min_kl_beliefs(inst: ContractInstance, alpha, tol: float = MIN_KL_TOL) -> list[int]:
    """Indices of beliefs whose expected KL is within ``tol`` (relative) of the minimum."""
    alpha = check_distribution(alpha, inst.n_actions, "action distribution")
    return _min_kl_from_profiles(kl_profile_matrix(inst), alpha, tol)


def mixing_point(inst: ContractInstance, belief_1: int, belief_2: int) -> float | None:
    """The unique alpha(a1) at which two beliefs have equal expected KL, if in [0, 1].

    Solved from the defining equality of the two expected divergences.  Returns
    None for parallel (degenerate) profiles; a KL tie at a pure action violates
    genericity and is reported as None with a warning.
    """
    if inst.n_actions != 2:
        raise EquilibriumError("mixing points are defined for two-action instances")
    if belief_1 == belief_2:
        raise EquilibriumError("mixing point needs two distinct beliefs")
    profiles = kl_profile_matrix(inst)
    if np.any(np.isinf(profiles[[belief_1, belief_2]])):
        raise EquilibriumError("mixing point requires finite KL profiles")
    d1 = profiles[belief_1, 0] - profiles[belief_2, 0]
    d2 = profiles[belief_1, 1] - profiles[belief_2, 1]
    if abs(d1) < MIN_KL_TOL or abs(d2) < MIN_KL_TOL:
        warnings.warn(
            f"beliefs {belief_1} and {belief_2} tie in KL at a pure action;"
            " instance is non-generic",
            NonGenericWarning,
            stacklevel=2,
        )
        return None
    if d1 == d2:
        return None
    a1 = d2 / (d2 - d1)
    if 0.0 <= a1 <= 1.0:
        return float(a1)
    return None


def break_points(inst: ContractInstance, contract: Contract | None = None) -> BreakPointDiagram:
    """Partition of alpha(a1) in [0, 1] by changes of the KL-minimizing belief set.

    Break points are the mixing points of belief pairs that are simultaneous
    KL-minimizers there, plus the endpoints.  Region actions are best responses
    under ``contract`` (the zero contract when omitted).  Non-generic instances
    still produce a diagram, flagged unreliable.
    """
    if inst.n_actions != 2:
        raise EquilibriumError("break points are defined for two-action instances")
    if contract is None:
        contract = zero_contract(inst)
    notes: list[str] = []
    report = check_generic(inst)
    if not report.passed:
        notes.extend(report.violations)

    profiles = kl_profile_matrix(inst)
    points = {0.0, 1.0}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonGenericWarning)
        for i in range(inst.n_beliefs):
            for j in range(i + 1, inst.n_beliefs):
                if np.any(np.isinf(profiles[[i, j]])):
                    continue  # cannot be jointly minimal at interior alpha
                a1 = mixing_point(inst, i, j)
                if a1 is None:
                    continue
                jointly = _min_kl_from_profiles(
                    profiles, np.array([a1, 1.0 - a1]), MIN_KL_TOL
                )
                if i in jointly and j in jointly:
                    points.add(round(a1, 15))

    bps = np.array(sorted(points))
    utils = utility_matrix(inst, contract)
    region_actions = []
    for lo, hi in zip(bps[:-1], bps[1:]):
        mid = 0.5 * (lo + hi)
        mins = _min_kl_from_profiles(profiles, np.array([mid, 1.0 - mid]), MIN_KL_TOL)
        if len(mins) > 1:
            notes.append(
                f"multiple KL-minimizing beliefs strictly inside ({lo:.6g}, {hi:.6g})"
            )
        region_actions.append(int(np.argmax(utils[:, mins[0]])))
    return BreakPointDiagram(
        break_points=bps,
        region_actions=tuple(region_actions),
        reliable=not notes,
        warnings=tuple(notes),
    )


def best_response_set(inst: ContractInstance, alpha, contract: Contract) -> list[int]:
    """Actions supported by some posterior over the KL-minimizing beliefs at alpha."""
    if inst.n_actions != 2:
        raise EquilibriumError("best_response_set is defined for two-action instances")
    mins = min_kl_beliefs(inst, alpha)
    utils = utility_matrix(inst, contract)
    gaps = utils[0, mins] - utils[1, mins]  # V(a1, B) - V(a2, B) over minimizers
    out = []
    if np.max(gaps) >= -INDIFFERENCE_TOL:
        out.append(0)
    if np.min(gaps) <= INDIFFERENCE_TOL:
        out.append(1)
    return out


def _verify(
    inst: ContractInstance,
    utils: np.ndarray,
    profiles: np.ndarray,
    alpha: np.ndarray,
    mu: np.ndarray,
    epsilon: float,
    consistency_tol: float,
) -> BerkNashCertificate:
    v_mu = utils @ mu
    best = float(np.max(v_mu))
    support_a = alpha > 1e-15
    if epsilon == 0:
        opt_residual = best - float(np.min(v_mu[support_a]))
    else:
        opt_residual = best - float(alpha @ v_mu)
    opt_residual = max(opt_residual, 0.0)

    ekls = expected_kls(profiles, alpha)
    finite = np.isfinite(ekls)
    support_b = mu > 1e-15
    if not np.any(finite):
        cons_residual = 0.0  # all beliefs equally (infinitely) inconsistent
    else:
        best_kl = float(np.min(ekls[finite]))
        worst_supported = float(np.max(ekls[support_b]))
        cons_residual = max(worst_supported - best_kl, 0.0)

    return BerkNashCertificate(
        alpha=alpha,
        mu=mu,
        optimality_residual=opt_residual,
        consistency_residual=cons_residual,
        epsilon=epsilon,
        valid=bool(opt_residual <= epsilon and cons_residual <= consistency_tol),
    )


def verify_berk_nash(
    inst: ContractInstance,
    contract: Contract,
    alpha,
    mu,
    epsilon: float,
    consistency_tol: float = CONSISTENCY_TOL,
) -> BerkNashCertificate:
    """Score an (alpha, mu) pair against the equilibrium conditions.

    The optimality residual is the posterior-expected utility shortfall: in the
    relaxed mode (epsilon > 0) it is measured for the alpha-average action; for
    epsilon = 0 it is the worst shortfall over supported actions.  The
    consistency residual is the worst expected-KL excess of supported beliefs
    over the belief-set minimum.  Always returns a certificate; validity is a
    field, never an exception.
    """
    alpha = check_distribution(alpha, inst.n_actions, "action distribution")
    mu = check_distribution(mu, inst.n_beliefs, "posterior")
    return _verify(
        inst,
        utility_matrix(inst, contract),
        kl_profile_matrix(inst),
        alpha,
        mu,
        epsilon,
        consistency_tol,
    )


def _indifference_weight(g1: float, g2: float) -> float | None:
    """Weight on the first belief that makes the agent indifferent, if in [0, 1].

    g_i is the utility gap V(a1, B_i, P) - V(a2, B_i, P).
    """
    if g1 == g2:
        return None
    w = g2 / (g2 - g1)
    if 0.0 <= w <= 1.0:
        return float(w)
    return None


def _candidate_posteriors(
    n_beliefs: int, mins: list[int], gaps: np.ndarray | None
) -> list[np.ndarray]:
    out = []
    for k in mins:
        mu = np.zeros(n_beliefs)
        mu[k] = 1.0
        out.append(mu)
    if gaps is not None:
        for i_pos in range(len(mins)):
            for j_pos in range(i_pos + 1, len(mins)):
                i, j = mins[i_pos], mins[j_pos]
                w = _indifference_weight(float(gaps[i]), float(gaps[j]))
                if w is None or w in (0.0, 1.0):
                    continue
                mu = np.zeros(n_beliefs)
                mu[i], mu[j] = w, 1.0 - w
                out.append(mu)
    return out


def candidate_posteriors(
    inst: ContractInstance,
    contract: Contract,
    alpha,
    consistency_slack: float = 0.0,
) -> list[np.ndarray]:
    """Consistent posterior candidates at alpha: point masses on each KL-minimizing
    belief plus indifference mixes over minimizing pairs.

    ``consistency_slack`` widens the admissible belief set to those whose
    expected KL exceeds the minimum by at most the slack; useful for scoring
    finite-horizon empirical frequencies that hover near a break point.
    """
    alpha = check_distribution(alpha, inst.n_actions, "action distribution")
    profiles = kl_profile_matrix(inst)
    mins = _min_kl_from_profiles(profiles, alpha, MIN_KL_TOL)
    if consistency_slack > 0:
        ekls = expected_kls(profiles, alpha)
        best = float(np.min(ekls[np.isfinite(ekls)]))
        mins = [k for k in range(inst.n_beliefs) if ekls[k] <= best + consistency_slack]
    utils = utility_matrix(inst, contract)
    gaps = utils[0] - utils[1] if inst.n_actions == 2 else None
    return _candidate_posteriors(inst.n_beliefs, mins, gaps)


def best_consistent_posterior(
    inst: ContractInstance,
    contract: Contract,
    alpha,
    consistency_slack: float = 0.0,
) -> np.ndarray:
    """The (slack-)consistent posterior minimizing the optimality residual at alpha."""
    best_mu, best_res = None, math.inf
    for mu in candidate_posteriors(inst, contract, alpha, consistency_slack):
        cert = verify_berk_nash(inst, contract, alpha, mu, epsilon=1.0)
        if cert.optimality_residual < best_res:
            best_mu, best_res = mu, cert.optimality_residual
    if best_mu is None:
        raise EquilibriumError("no consistent posterior exists at this alpha")
    return best_mu


def find_equilibria_grid(
    inst: ContractInstance,
    contract: Contract,
    grid_n: int = 10_000,
    epsilon: float = 1e-6,
) -> list[BerkNashCertificate]:
    """Brute-force equilibrium scan for two-action instances.

    Scans alpha(a1) over a uniform grid plus all break points (so exact mixed
    equilibria are not lost to discretization), enumerates consistent posterior
    candidates at each point, and returns every certificate valid at
    ``epsilon``, in ascending alpha(a1) order.
    """
    if inst.n_actions != 2:
        raise EquilibriumError("the grid finder supports two-action instances only")
    diagram = break_points(inst, contract)
    profiles = kl_profile_matrix(inst)
    utils = utility_matrix(inst, contract)
    gaps = utils[0] - utils[1]
    values = np.unique(np.concatenate([np.linspace(0.0, 1.0, grid_n + 1), diagram.break_points]))
    found: list[BerkNashCertificate] = []
    for a1 in values:
        alpha = np.array([a1, 1.0 - a1])
        try:
            mins = _min_kl_from_profiles(profiles, alpha, MIN_KL_TOL)
        except EquilibriumError:
            continue
        for mu in _candidate_posteriors(inst.n_beliefs, mins, gaps):
            cert = _verify(inst, utils, profiles, alpha, mu, epsilon, CONSISTENCY_TOL)
            if cert.valid:
                found.append(cert)
    return found
