"""Core domain model: instances, contracts, KL machinery, and payoff evaluation.

An instance bundles a finite action set with costs, a finite reward set, the
true per-action reward distributions, and the agent's belief set with a
full-support prior.  Every type is immutable after validation and every
operation is a pure function, so the whole module is safe for concurrent use
without coordination.

KL divergences are natural-log (nats).  A belief that misses the support of a
true distribution gets an explicit ``math.inf`` divergence, never a large
finite stand-in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Probability rows off by at most this much are silently renormalized;
# larger deviations are hard errors.
PROB_TOL = 1e-6

# Distribution vectors (action mixes, posteriors) must sum to 1 this tightly.
DIST_TOL = 1e-12

_GENERIC_KL_TOL = 1e-9
_GENERIC_DET_TOL = 1e-12


class InstanceError(ValueError):
    """An instance, contract, or distribution description violates its contract."""


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RewardSpace:
    """Ordered finite set of distinct contractible reward values (currency units)."""

    rewards: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class ActionSpace:
    """Named actions with nonnegative costs, index-aligned."""

    names: tuple[str, ...]
    costs: np.ndarray

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Belief:
    """A subjective model of the world: one reward distribution per action."""

    name: str
    dists: np.ndarray  # (n_actions, n_rewards)


@dataclass(frozen=True)
class ContractInstance:
    """A validated principal-agent environment with a misspecifiable agent."""

    actions: ActionSpace
    rewards: RewardSpace
    true_dists: np.ndarray  # (n_actions, n_rewards)
    beliefs: tuple[Belief, ...]
    prior: np.ndarray  # (n_beliefs,), full support

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_rewards(self) -> int:
        return len(self.rewards)

    @property
    def n_beliefs(self) -> int:
        return len(self.beliefs)

    def belief_array(self) -> np.ndarray:
        """All belief distributions stacked as (n_beliefs, n_actions, n_rewards)."""
        return np.stack([b.dists for b in self.beliefs])

    def to_dict(self) -> dict:
        return {
            "actions": [
                {"name": n, "cost": float(c)}
                for n, c in zip(self.actions.names, self.actions.costs)
            ],
            "rewards": [float(r) for r in self.rewards.rewards],
            "true_dists": self.true_dists.tolist(),
            "beliefs": [
                {"name": b.name, "dists": b.dists.tolist()} for b in self.beliefs
            ],
            "prior": self.prior.tolist(),
        }


@dataclass(frozen=True)
class Contract:
    """Limited-liability payment rule: one nonnegative payment per reward."""

    payments: np.ndarray

    def to_list(self) -> list[float]:
        return [float(p) for p in self.payments]


@dataclass(frozen=True)
class KLProfile:
    """Per-action KL divergence of one belief from the truth (nats)."""

    belief_name: str
    kl_by_action: np.ndarray

    @property
    def has_infinite(self) -> bool:
        return bool(np.any(np.isinf(self.kl_by_action)))


@dataclass(frozen=True)
class GenericReport:
    """Outcome of the two-action genericity check."""

    passed: bool
    violations: tuple[str, ...]


def _normalize_row(row: np.ndarray, what: str) -> np.ndarray:
    if np.any(~np.isfinite(row)):
        raise InstanceError(f"{what}: non-finite probability entry")
    if np.any(row < 0):
        raise InstanceError(f"{what}: negative probability")
    s = float(row.sum())
    if abs(s - 1.0) > PROB_TOL:
        raise InstanceError(f"{what}: sum deviation {s - 1.0:+.3e} exceeds {PROB_TOL:g}")
    return row / s


def validate_instance(raw: dict) -> ContractInstance:
    """Validate a parsed instance description and return the immutable instance.

    Probability rows off by at most 1e-6 are renormalized; the prior defaults
    to uniform when absent and must have full support.
    """
    if not isinstance(raw, dict):
        raise InstanceError("instance description must be a JSON object")
    for key in ("actions", "rewards", "true_dists", "beliefs"):
        if key not in raw:
            raise InstanceError(f"missing key {key!r}")

    try:
        names = tuple(str(a["name"]) for a in raw["actions"])
        costs = np.array([float(a["cost"]) for a in raw["actions"]])
    except (TypeError, KeyError) as exc:
        raise InstanceError(f"malformed actions block: {exc}") from exc
    if len(names) == 0:
        raise InstanceError("empty action set")
    if len(set(names)) != len(names):
        raise InstanceError("action names must be distinct")
    if np.any(~np.isfinite(costs)) or np.any(costs < 0):
        raise InstanceError("costs must be finite and nonnegative")

    rewards = np.array([float(r) for r in raw["rewards"]])
    if rewards.size == 0:
        raise InstanceError("empty reward set")
    if np.any(~np.isfinite(rewards)):
        raise InstanceError("rewards must be finite")
    if len(np.unique(rewards)) != len(rewards):
        raise InstanceError("reward values must be pairwise distinct")

    n_a, n_r = len(names), len(rewards)

    true_dists = np.asarray(raw["true_dists"], dtype=float)
    if true_dists.shape != (n_a, n_r):
        raise InstanceError(
            f"dimension mismatch: true_dists has shape {true_dists.shape},"
            f" expected {(n_a, n_r)}"
        )
    true_dists = np.array(
        [_normalize_row(row, f"true_dists[{names[i]}]") for i, row in enumerate(true_dists)]
    )

    if len(raw["beliefs"]) == 0:
        raise InstanceError("empty belief set")
    beliefs = []
    for k, b in enumerate(raw["beliefs"]):
        try:
            bname = str(b.get("name", f"B{k}"))
            dists = np.asarray(b["dists"], dtype=float)
        except (TypeError, KeyError) as exc:
            raise InstanceError(f"malformed belief #{k}: {exc}") from exc
        if dists.shape != (n_a, n_r):
            raise InstanceError(
                f"dimension mismatch: belief {bname!r} has shape {dists.shape},"
                f" expected {(n_a, n_r)}"
            )
        dists = np.array(
            [_normalize_row(row, f"belief {bname!r}[{names[i]}]") for i, row in enumerate(dists)]
        )
        beliefs.append(Belief(name=bname, dists=_readonly(dists)))

    prior_raw = raw.get("prior")
    if prior_raw is None:
        prior = np.full(len(beliefs), 1.0 / len(beliefs))
    else:
        prior = np.asarray(prior_raw, dtype=float)
        if prior.shape != (len(beliefs),):
            raise InstanceError("dimension mismatch: prior length != number of beliefs")
        if np.any(~np.isfinite(prior)) or np.any(prior <= 0):
            raise InstanceError("non-full-support prior: every entry must be > 0")
        s = float(prior.sum())
        if abs(s - 1.0) > PROB_TOL:
            raise InstanceError(f"prior: sum deviation {s - 1.0:+.3e} exceeds {PROB_TOL:g}")
        prior = prior / s

    return ContractInstance(
        actions=ActionSpace(names=names, costs=_readonly(costs)),
        rewards=RewardSpace(rewards=_readonly(rewards)),
        true_dists=_readonly(true_dists),
        beliefs=tuple(beliefs),
        prior=_readonly(prior),
    )


def validate_contract(raw, n_rewards: int) -> Contract:
    """Validate a payment list against the limited-liability constraint."""
    payments = np.asarray(raw, dtype=float)
    if payments.shape != (n_rewards,):
        raise InstanceError(
            f"dimension mismatch: contract has {payments.size} payments,"
            f" expected {n_rewards}"
        )
    if np.any(~np.isfinite(payments)):
        raise InstanceError("payments must be finite")
    if np.any(payments < 0):
        raise InstanceError("limited liability violated: negative payment")
    return Contract(payments=_readonly(payments))


def zero_contract(inst: ContractInstance) -> Contract:
    return Contract(payments=_readonly(np.zeros(inst.n_rewards)))


def check_distribution(vec, n: int, what: str = "distribution") -> np.ndarray:
    """Validate a probability vector (entries >= 0, sums to 1 within 1e-12)."""
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (n,):
        raise InstanceError(f"{what}: expected length {n}, got shape {arr.shape}")
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise InstanceError(f"{what}: entries must be finite and nonnegative")
    if abs(float(arr.sum()) - 1.0) > DIST_TOL:
        raise InstanceError(f"{what}: entries must sum to 1 within {DIST_TOL:g}")
    return arr


def kl_divergence(p, q) -> float:
    """KL divergence sum_r p(r) ln(p(r)/q(r)) in nats.

    Terms with p(r) = 0 contribute nothing; returns ``math.inf`` exactly when
    q assigns zero probability to some outcome with p(r) > 0.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InstanceError(f"dimension mismatch: {p.shape} vs {q.shape}")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    pm = p[mask]
    return float(np.sum(pm * np.log(pm / q[mask])))


def kl_profile(inst: ContractInstance, belief_index: int) -> KLProfile:
    """Per-action divergence of belief ``belief_index`` from the true distributions."""
    belief = inst.beliefs[belief_index]
    kls = np.array(
        [kl_divergence(inst.true_dists[a], belief.dists[a]) for a in range(inst.n_actions)]
    )
    return KLProfile(belief_name=belief.name, kl_by_action=_readonly(kls))


def kl_profile_matrix(inst: ContractInstance) -> np.ndarray:
    """All KL profiles stacked as (n_beliefs, n_actions); entries may be inf."""
    return np.array([kl_profile(inst, k).kl_by_action for k in range(inst.n_beliefs)])


def agent_utility(inst: ContractInstance, action: int, belief: int, contract: Contract) -> float:
    """Expected payment under the belief's distribution for ``action``, minus its cost."""
    b = inst.beliefs[belief].dists[action]
    return float(b @ contract.payments - inst.actions.costs[action])


def true_agent_utility(inst: ContractInstance, action: int, contract: Contract) -> float:
    """Agent utility evaluated under the true distribution instead of a belief."""
    return float(inst.true_dists[action] @ contract.payments - inst.actions.costs[action])


def principal_revenue(inst: ContractInstance, alpha, contract: Contract) -> float:
    """Expected reward minus payment when the agent mixes actions according to alpha."""
    alpha = check_distribution(alpha, inst.n_actions, "action distribution")
    net = inst.true_dists @ (inst.rewards.rewards - contract.payments)
    return float(alpha @ net)


def expected_kl(inst: ContractInstance, alpha, belief_index: int) -> float:
    """Alpha-weighted KL divergence of one belief; inf if any weighted term is inf."""
    alpha = check_distribution(alpha, inst.n_actions, "action distribution")
    kls = kl_profile(inst, belief_index).kl_by_action
    if np.any(np.isinf(kls) & (alpha > 0)):
        return math.inf
    finite = ~np.isinf(kls)
    return float(alpha[finite] @ kls[finite])


def misspecification_level(inst: ContractInstance) -> float:
    """min over beliefs of the worst-action KL divergence from the truth."""
    worst = [float(np.max(kl_profile(inst, k).kl_by_action)) for k in range(inst.n_beliefs)]
    return min(worst)


def check_generic(inst: ContractInstance) -> GenericReport:
    """Check the two-action genericity assumption behind the equilibrium machinery.

    Flags (i) belief pairs with equal KL at some action and (ii) belief triples
    whose KL-profile difference vectors are linearly dependent.  Triples with
    infinite profile entries are only screened through check (i).
    """
    if inst.n_actions != 2:
        raise InstanceError("genericity check only supports two-action instances")
    profiles = kl_profile_matrix(inst)
    violations: list[str] = []
    n = inst.n_beliefs
    for i in range(n):
        for j in range(i + 1, n):
            for a in range(2):
                ki, kj = profiles[i, a], profiles[j, a]
                equal_inf = math.isinf(ki) and math.isinf(kj)
                if equal_inf or abs(ki - kj) < _GENERIC_KL_TOL:
                    violations.append(
                        f"beliefs {inst.beliefs[i].name!r} and {inst.beliefs[j].name!r}"
                        f" have equal KL at action {inst.actions.names[a]!r}"
                    )
    finite = [k for k in range(n) if not np.any(np.isinf(profiles[k]))]
    for ii in range(len(finite)):
        for jj in range(ii + 1, len(finite)):
            for kk in range(jj + 1, len(finite)):
                i, j, k = finite[ii], finite[jj], finite[kk]
                u = profiles[j] - profiles[i]
                v = profiles[k] - profiles[i]
                det = u[0] * v[1] - u[1] * v[0]
                if abs(det) < _GENERIC_DET_TOL:
                    violations.append(
                        f"KL profiles of beliefs {i}, {j}, {k} are collinear"
                        f" (|det| = {abs(det):.3e})"
                    )
    return GenericReport(passed=not violations, violations=tuple(violations))
