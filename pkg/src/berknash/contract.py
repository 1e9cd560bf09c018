"""Revenue-optimal contract solver for two-action instances.

Support enumeration over (action support, posterior support of size <= 2),
action-range linear programs, the two-piece convex decomposition of the
contract region for each support pattern, and the parametrized revenue LPs
evaluated at the action-range endpoints.  A grid-based brute-force search
over contracts serves as an independent oracle.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .equilibrium import (
    MIN_KL_TOL,
    BerkNashCertificate,
    NonGenericWarning,
    _min_kl_from_profiles,
    expected_kls,
    find_equilibria_grid,
    verify_berk_nash,
)
from .lp import EQ, GEQ, LEQ, LinearProgram, LPSolution, solve_lp
from .model import (
    Contract,
    ContractInstance,
    check_generic,
    kl_profile_matrix,
    principal_revenue,
    validate_contract,
)

_PURE_TOL = 1e-9      # how close an action-range endpoint must be to 0/1 for pure supports
_MU_CLAMP_TOL = 1e-9  # reconstruction slack before a branch is discarded
_BRUTE_EPS = 1e-9     # epsilon at which the brute-force oracle accepts certificates
_INF_KL_STANDIN = 1e12


class ContractSolverError(RuntimeError):
    """The solver could not produce an equilibrium-supporting contract."""


def solver_epsilon(inst: ContractInstance) -> float:
    """Optimality slack used to verify solver output, scaled to the instance."""
    scale = float(np.max(np.abs(inst.rewards.rewards))) + float(np.max(inst.actions.costs))
    return 1e-6 * (1.0 + scale)


@dataclass(frozen=True)
class SupportCandidate:
    """A candidate (action support, posterior support) pair for enumeration."""

    action_support: tuple[int, ...]
    belief_support: tuple[int, ...]


@dataclass(frozen=True)
class ActionRange:
    """Feasible alpha(a1) interval for a fixed consistent belief support."""

    a1_min: float
    a1_max: float
    feasible: bool

    @staticmethod
    def infeasible() -> "ActionRange":
        return ActionRange(a1_min=math.nan, a1_max=math.nan, feasible=False)


@dataclass(frozen=True)
class AffineFunctional:
    """f(P) = coeffs . payments + const."""

    coeffs: np.ndarray
    const: float

    def __call__(self, payments: np.ndarray) -> float:
        return float(self.coeffs @ payments + self.const)


@dataclass(frozen=True)
class RegionPiece:
    """One convex piece: affine constraints, plus the posterior weight it witnesses.

    ``mu_first`` is the weight on the first support belief; None means the
    weight is reconstructed as E(P)/D(P).
    """

    constraints: tuple[tuple[AffineFunctional, str], ...]
    mu_first: float | None

    def contains(self, payments: np.ndarray, tol: float = 1e-9) -> bool:
        for f, rel in self.constraints:
            v = f(payments)
            if rel == LEQ and v > tol:
                return False
            if rel == GEQ and v < -tol:
                return False
            if rel == EQ and abs(v) > tol:
                return False
        return True


@dataclass(frozen=True)
class ContractRegion:
    """Contracts admitting a posterior on the belief support that makes every
    action in the action support weakly optimal; a union of <= 2 convex pieces."""

    action_support: tuple[int, ...]
    belief_support: tuple[int, ...]
    pieces: tuple[RegionPiece, ...]
    e: AffineFunctional
    d: AffineFunctional | None

    def contains(self, payments: np.ndarray, tol: float = 1e-9) -> bool:
        return any(piece.contains(payments, tol) for piece in self.pieces)

    def mu_first_weight(self, piece: RegionPiece, payments: np.ndarray) -> float | None:
        """Posterior weight on the first support belief for a point of ``piece``.

        None signals an out-of-range reconstruction (branch must be discarded).
        """
        if piece.mu_first is not None:
            return piece.mu_first
        d_val = self.d(payments)  # type: ignore[misc]
        e_val = self.e(payments)
        if abs(d_val) <= 1e-12:
            return 0.5 if abs(e_val) <= 1e-12 else None
        w = e_val / d_val
        if w < -_MU_CLAMP_TOL or w > 1.0 + _MU_CLAMP_TOL:
            return None
        return float(min(max(w, 0.0), 1.0))


@dataclass(frozen=True)
class SolveReport:
    """Optimal contract with its witnessing equilibrium certificate."""

    contract: Contract
    certificate: BerkNashCertificate
    revenue: float
    support: SupportCandidate
    lp_branch: str

    def to_dict(self) -> dict:
        return {
            "contract": self.contract.to_list(),
            "alpha": self.certificate.alpha.tolist(),
            "mu": self.certificate.mu.tolist(),
            "revenue": self.revenue,
            "support": {
                "actions": list(self.support.action_support),
                "beliefs": list(self.support.belief_support),
            },
            "branch": self.lp_branch,
            "certificate": self.certificate.to_dict(),
        }


def _finite_profiles_or_raise(profiles: np.ndarray, belief_support: tuple[int, ...]) -> None:
    if np.any(np.isinf(profiles[list(belief_support)])):
        raise ContractSolverError(
            "belief support has an infinite KL profile; it can never be consistent"
            " at interior action mixes"
        )


def action_range(inst: ContractInstance, belief_support) -> ActionRange:
    """Feasible interval of alpha(a1) keeping every support belief KL-minimal.

    Solves the min/max linear programs over the action simplex subject to
    one consistency inequality per (support belief, belief) pair.
    """
    if inst.n_actions != 2:
        raise ContractSolverError("action ranges are defined for two-action instances")
    support = tuple(sorted(set(int(k) for k in belief_support)))
    if not support:
        raise ContractSolverError("belief support must be nonempty")
    profiles = kl_profile_matrix(inst)
    _finite_profiles_or_raise(profiles, support)

    # A comparison belief with an infinite component only binds where the
    # corresponding action weight is zero; a large finite stand-in keeps the
    # boundary semantics while staying linear.
    clipped = np.where(np.isinf(profiles), _INF_KL_STANDIN, profiles)
    rows = [(np.ones(2), EQ, 1.0)]
    for bs in support:
        for b in range(inst.n_beliefs):
            if b == bs:
                continue
            rows.append((profiles[bs] - clipped[b], LEQ, 0.0))

    lo = solve_lp(LinearProgram.build(np.array([1.0, 0.0]), "min", rows))
    if lo.status == "infeasible":
        return ActionRange.infeasible()
    hi = solve_lp(LinearProgram.build(np.array([1.0, 0.0]), "max", rows))
    if lo.status != "optimal" or hi.status != "optimal":
        raise ContractSolverError(f"action-range LP returned {lo.status}/{hi.status}")
    a1_min = min(max(lo.value, 0.0), 1.0)
    a1_max = min(max(hi.value, 0.0), 1.0)
    return ActionRange(a1_min=a1_min, a1_max=a1_max, feasible=True)


def _gap_functional(inst: ContractInstance, belief: int) -> AffineFunctional:
    """g_B(P) = V(a1, B, P) - V(a2, B, P), affine in the payments."""
    dists = inst.beliefs[belief].dists
    coeffs = dists[0] - dists[1]
    const = float(inst.actions.costs[1] - inst.actions.costs[0])
    return AffineFunctional(coeffs=coeffs, const=const)


def _neg(f: AffineFunctional) -> AffineFunctional:
    return AffineFunctional(coeffs=-f.coeffs, const=-f.const)


def _diff(f: AffineFunctional, g: AffineFunctional) -> AffineFunctional:
    return AffineFunctional(coeffs=f.coeffs - g.coeffs, const=f.const - g.const)


def contract_region(inst: ContractInstance, action_support, belief_support) -> ContractRegion:
    """Convex-piece description of the contracts supporting the requested pattern.

    For a single support belief the region is one linear inequality (or
    equality) in E(P); for two beliefs it is the union of two convex pieces in
    the functionals D(P) and E(P), with the posterior weight on the first
    belief reconstructed as E(P)/D(P) on indifference pieces.
    """
    if inst.n_actions != 2:
        raise ContractSolverError("contract regions are defined for two-action instances")
    a_sup = tuple(sorted(set(int(a) for a in action_support)))
    b_sup = tuple(int(b) for b in belief_support)
    if not a_sup or any(a not in (0, 1) for a in a_sup):
        raise ContractSolverError("action support must be a nonempty subset of the two actions")
    if len(b_sup) not in (1, 2) or len(set(b_sup)) != len(b_sup):
        raise ContractSolverError("belief support must contain one or two distinct beliefs")

    if len(b_sup) == 1:
        e = _neg(_gap_functional(inst, b_sup[0]))  # E(P) = V(a2,B*,P) - V(a1,B*,P)
        if a_sup == (0,):
            pieces = (RegionPiece(constraints=((e, LEQ),), mu_first=1.0),)
        elif a_sup == (1,):
            pieces = (RegionPiece(constraints=((e, GEQ),), mu_first=1.0),)
        else:
            pieces = (RegionPiece(constraints=((e, EQ),), mu_first=1.0),)
        return ContractRegion(
            action_support=a_sup, belief_support=b_sup, pieces=pieces, e=e, d=None
        )

    g1 = _gap_functional(inst, b_sup[0])
    g2 = _gap_functional(inst, b_sup[1])
    e = _neg(g2)
    d = _diff(g1, g2)
    d_minus_e = _diff(d, e)
    if a_sup == (0, 1):
        # Indifference: mu * D(P) = E(P) solvable in [0, 1].
        pieces = (
            RegionPiece(constraints=((d_minus_e, GEQ), (e, GEQ)), mu_first=None),
            RegionPiece(constraints=((e, LEQ), (d_minus_e, LEQ)), mu_first=None),
        )
    elif a_sup == (0,):
        # Weak preference for a1: E <= 0 (second belief works) or D >= E >= 0.
        pieces = (
            RegionPiece(constraints=((e, LEQ),), mu_first=0.0),
            RegionPiece(constraints=((d_minus_e, GEQ), (e, GEQ)), mu_first=1.0),
        )
    else:
        # Weak preference for a2: E >= 0 or D <= E <= 0.
        pieces = (
            RegionPiece(constraints=((e, GEQ),), mu_first=0.0),
            RegionPiece(constraints=((e, LEQ), (d_minus_e, LEQ)), mu_first=1.0),
        )
    return ContractRegion(action_support=a_sup, belief_support=b_sup, pieces=pieces, e=e, d=d)


def _support_endpoints(a_sup: tuple[int, ...], rng: ActionRange) -> list[float]:
    if a_sup == (0,):
        return [1.0] if rng.a1_max >= 1.0 - _PURE_TOL else []
    if a_sup == (1,):
        return [0.0] if rng.a1_min <= _PURE_TOL else []
    if rng.a1_max - rng.a1_min < 1e-12:
        return [rng.a1_min]
    return [rng.a1_min, rng.a1_max]


def solve_support(
    inst: ContractInstance,
    support: SupportCandidate,
    epsilon: float | None = None,
) -> SolveReport | None:
    """Best contract whose induced equilibrium matches ``support``, or None.

    Evaluates the revenue LP at each feasible action-range endpoint and on
    each convex region piece, then reconstructs the witnessing posterior.
    """
    if epsilon is None:
        epsilon = solver_epsilon(inst)
    a_sup = tuple(sorted(support.action_support))
    b_sup = tuple(sorted(support.belief_support))
    profiles = kl_profile_matrix(inst)
    if np.any(np.isinf(profiles[list(b_sup)])):
        return None
    rng = action_range(inst, b_sup)
    if not rng.feasible:
        return None
    endpoints = _support_endpoints(a_sup, rng)
    if not endpoints:
        return None
    region = contract_region(inst, a_sup, b_sup)

    rewards = inst.rewards.rewards
    best: tuple[float, Contract, np.ndarray, np.ndarray, str] | None = None
    for a1 in endpoints:
        alpha = np.array([a1, 1.0 - a1])
        weights = alpha @ inst.true_dists  # expected payment weight per reward
        base = float(alpha @ (inst.true_dists @ rewards))
        for p_idx, piece in enumerate(region.pieces):
            rows = [(f.coeffs, rel, -f.const) for f, rel in piece.constraints]
            sol: LPSolution = solve_lp(LinearProgram.build(-weights, "max", rows))
            if sol.status != "optimal":
                continue
            payments = np.maximum(sol.x, 0.0)
            w_first = region.mu_first_weight(piece, payments)
            if w_first is None:
                continue  # posterior reconstruction out of [0, 1]; discard branch
            mu = np.zeros(inst.n_beliefs)
            if len(b_sup) == 1:
                mu[b_sup[0]] = 1.0
            else:
                mu[b_sup[0]] = w_first
                mu[b_sup[1]] = 1.0 - w_first
            revenue = base + float(sol.value)
            branch = f"alpha={a1:.12g}|piece={p_idx}"
            if best is None or revenue > best[0] + 1e-15:
                best = (revenue, Contract(payments=payments), alpha, mu, branch)

    if best is None:
        return None
    revenue, contract, alpha, mu, branch = best
    cert = verify_berk_nash(inst, contract, alpha, mu, epsilon)
    return SolveReport(
        contract=contract,
        certificate=cert,
        revenue=revenue,
        support=SupportCandidate(action_support=a_sup, belief_support=b_sup),
        lp_branch=branch,
    )


def _enumerate_supports(inst: ContractInstance) -> list[SupportCandidate]:
    belief_supports = sorted(
        [(k,) for k in range(inst.n_beliefs)]
        + [tuple(p) for p in combinations(range(inst.n_beliefs), 2)]
    )
    return [
        SupportCandidate(action_support=a_sup, belief_support=b_sup)
        for a_sup in ((0,), (1,), (0, 1))
        for b_sup in belief_supports
    ]


def optimal_contract(
    inst: ContractInstance,
    epsilon: float | None = None,
    max_workers: int | None = None,
) -> SolveReport:
    """Revenue-optimal contract over all Berk-Nash-supportable configurations.

    Maximizes over the three action supports and all belief supports of size
    one or two; ties break by enumeration order.  The winning certificate is
    re-verified at the solver tolerance.
    """
    if inst.n_actions != 2:
        raise ContractSolverError("the optimal-contract solver supports two actions")
    if epsilon is None:
        epsilon = solver_epsilon(inst)
    generic = check_generic(inst)
    if not generic.passed:
        warnings.warn(
            "instance fails the genericity check; the solver proceeds best-effort: "
            + "; ".join(generic.violations[:3]),
            NonGenericWarning,
            stacklevel=2,
        )
    profiles = kl_profile_matrix(inst)
    if not np.any(np.all(np.isfinite(profiles), axis=1)):
        raise ContractSolverError("no belief with a finite KL profile")

    candidates = _enumerate_supports(inst)
    finite = [not np.any(np.isinf(profiles[list(c.belief_support)])) for c in candidates]

    def run(idx: int) -> SolveReport | None:
        if not finite[idx]:
            return None
        return solve_support(inst, candidates[idx], epsilon)

    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            reports = list(pool.map(run, range(len(candidates))))
    else:
        reports = [run(i) for i in range(len(candidates))]

    best: SolveReport | None = None
    for rep in reports:  # enumeration order breaks revenue ties
        if rep is not None and (best is None or rep.revenue > best.revenue + 1e-15):
            best = rep
    if best is None:
        raise ContractSolverError("no equilibrium-supporting contract found")

    cert = best.certificate
    if not cert.valid:
        raise ContractSolverError(
            "winning branch failed re-verification: optimality residual"
            f" {cert.optimality_residual:.3e}, consistency residual"
            f" {cert.consistency_residual:.3e}"
        )
    return best


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _AlphaPartition:
    """Contract-independent structure of the KL-minimizing correspondence."""

    bps: np.ndarray                      # sorted, includes 0 and 1
    bp_minsets: tuple[tuple[int, ...], ...]
    interval_minsets: tuple[tuple[int, ...], ...]


def _alpha_partition(inst: ContractInstance) -> _AlphaPartition:
    profiles = kl_profile_matrix(inst)
    pts = {0.0, 1.0}
    for i, j in combinations(range(inst.n_beliefs), 2):
        if np.any(np.isinf(profiles[[i, j]])):
            continue
        d1 = profiles[i, 0] - profiles[j, 0]
        d2 = profiles[i, 1] - profiles[j, 1]
        if d1 == d2 or abs(d1) < MIN_KL_TOL or abs(d2) < MIN_KL_TOL:
            continue
        a1 = d2 / (d2 - d1)
        if 0.0 <= a1 <= 1.0:
            joint = _min_kl_from_profiles(profiles, np.array([a1, 1.0 - a1]), MIN_KL_TOL)
            if i in joint and j in joint:
                pts.add(round(float(a1), 15))
    bps = np.array(sorted(pts))
    bp_minsets = tuple(
        tuple(_min_kl_from_profiles(profiles, np.array([a1, 1.0 - a1]), MIN_KL_TOL))
        for a1 in bps
    )
    interval_minsets = tuple(
        tuple(
            _min_kl_from_profiles(
                profiles, np.array([0.5 * (lo + hi), 1.0 - 0.5 * (lo + hi)]), MIN_KL_TOL
            )
        )
        for lo, hi in zip(bps[:-1], bps[1:])
    )
    return _AlphaPartition(bps=bps, bp_minsets=bp_minsets, interval_minsets=interval_minsets)


def _contract_blocks(pay_vals: np.ndarray, n_rewards: int, max_rows: int = 1 << 18):
    """Yield the full payment grid in lexicographic order as (m, n_rewards) blocks."""
    n_vals = len(pay_vals)
    total = n_vals**n_rewards
    powers = n_vals ** np.arange(n_rewards - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, max_rows):
        idx = np.arange(start, min(start + max_rows, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % n_vals
        yield pay_vals[digits]


def brute_force_optimal_contract(
    inst: ContractInstance,
    pay_grid_n: int = 200,
    pay_max: float | None = None,
    eq_grid_n: int = 2000,
) -> SolveReport:
    """Grid-search oracle: best equilibrium revenue over a full payment grid.

    Intended for small instances (three or fewer rewards); the grid has
    (pay_grid_n + 1) ** n_rewards contracts.  Semantics match running
    ``find_equilibria_grid`` per grid contract and keeping the
    revenue-maximal valid certificate; the search is vectorized over
    contracts using the contract-independent break-point partition, and
    revenue being affine in alpha pins per-interval maxima to grid or
    break-point values of alpha.  The returned certificate is re-derived with
    ``find_equilibria_grid`` on the winning contract.  Deterministic.
    """
    if inst.n_actions != 2:
        raise ContractSolverError("the brute-force oracle supports two actions")
    if pay_max is None:
        pay_max = 10.0 * (
            float(np.max(np.abs(inst.rewards.rewards))) + float(np.max(inst.actions.costs))
        )
    part = _alpha_partition(inst)
    rewards = inst.rewards.rewards
    f1, f2 = inst.true_dists[0], inst.true_dists[1]
    base1, base2 = float(f1 @ rewards), float(f2 @ rewards)
    gap_coeffs = np.array([b.dists[0] - b.dists[1] for b in inst.beliefs])  # (nB, nR)
    gap_const = float(inst.actions.costs[1] - inst.actions.costs[0])
    pay_vals = np.linspace(0.0, pay_max, pay_grid_n + 1)
    eps = _BRUTE_EPS
    n_grid = eq_grid_n

    best_val = -math.inf
    best_payments: np.ndarray | None = None

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for block in _contract_blocks(pay_vals, inst.n_rewards):
            g = block @ gap_coeffs.T + gap_const  # (m, nB)
            rev1 = base1 - block @ f1
            rev2 = base2 - block @ f2
            val = np.full(block.shape[0], -math.inf)

            def consider(mask: np.ndarray, revenue: np.ndarray) -> None:
                nonlocal val
                val = np.where(mask & (revenue > val), revenue, val)

            # Certificates pinned at break points (including the pure endpoints).
            for a1, minset in zip(part.bps, part.bp_minsets):
                rev = a1 * rev1 + (1.0 - a1) * rev2
                for b in minset:
                    residual = (1.0 - a1) * np.maximum(g[:, b], 0.0) + a1 * np.maximum(
                        -g[:, b], 0.0
                    )
                    consider(residual <= eps, rev)
                for b1, b2 in combinations(minset, 2):
                    consider(g[:, b1] * g[:, b2] <= 0.0, rev)

            # Certificates strictly inside an interval: the minimizing belief is
            # fixed there, validity caps alpha through the utility gap, and
            # affinity of revenue pins the maximum to a grid or endpoint alpha.
            for (lo, hi), minset in zip(
                zip(part.bps[:-1], part.bps[1:]), part.interval_minsets
            ):
                for b in minset:
                    gb = g[:, b]
                    a_lo = np.where(gb > eps, np.maximum(lo, 1.0 - eps / gb), lo)
                    a_hi = np.where(gb < -eps, np.minimum(hi, eps / (-gb)), hi)
                    ok = a_lo <= a_hi + 1e-18
                    snap_hi = np.floor(a_hi * n_grid + 1e-9) / n_grid
                    snap_lo = np.ceil(a_lo * n_grid - 1e-9) / n_grid
                    for cand in (snap_hi, snap_lo, np.full_like(gb, lo), np.full_like(gb, hi)):
                        in_range = (
                            ok
                            & (cand >= a_lo - 1e-15)
                            & (cand <= a_hi + 1e-15)
                            & (cand >= lo - 1e-15)
                            & (cand <= hi + 1e-15)
                        )
                        consider(in_range, cand * rev1 + (1.0 - cand) * rev2)

            top = int(np.argmax(val))
            if val[top] > best_val:
                best_val = float(val[top])
                best_payments = block[top].copy()

    if best_payments is None or not math.isfinite(best_val):
        raise ContractSolverError("brute force found no valid certificate on the grid")

    winner = validate_contract(best_payments, inst.n_rewards)
    certs = find_equilibria_grid(inst, winner, grid_n=eq_grid_n, epsilon=eps)
    if not certs:
        raise ContractSolverError("winning grid contract lost its certificate on re-derivation")
    revenues = [principal_revenue(inst, c.alpha, winner) for c in certs]
    pick = int(np.argmax(revenues))
    cert = certs[pick]
    a_sup = tuple(int(a) for a in np.flatnonzero(cert.alpha > 1e-15))
    b_sup = tuple(int(b) for b in np.flatnonzero(cert.mu > 1e-15))
    return SolveReport(
        contract=winner,
        certificate=cert,
        revenue=float(revenues[pick]),
        support=SupportCandidate(action_support=a_sup, belief_support=b_sup),
        lp_branch="brute-force-grid",
    )
