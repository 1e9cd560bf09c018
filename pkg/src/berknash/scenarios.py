"""Named instances and constructions: the revenue-loss environment, the
three-action cycling environment, and the game-to-contract reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    Contract,
    ContractInstance,
    InstanceError,
    agent_utility,
    kl_profile,
    validate_contract,
    validate_instance,
)


class ScenarioError(ValueError):
    """Scenario parameters outside their admissible ranges."""


@dataclass(frozen=True)
class UnhappyParams:
    """Parameters of the revenue-loss environment.

    ``delta`` = 0 is admitted as the closed-form limit (the misspecified belief
    then coincides with the truth); instance constructions are only
    interesting for delta > 0.
    """

    p: float
    c: float
    delta: float

    def __post_init__(self) -> None:
        if not 0.75 <= self.p <= 1.0:
            raise ScenarioError(f"p must lie in [3/4, 1], got {self.p}")
        # The headline revenue-gap parameters use c = 0.6, so the cost range
        # admits the whole unit interval.
        if not 0.0 <= self.c <= 1.0:
            raise ScenarioError(f"c must lie in [0, 1], got {self.c}")
        if not 0.0 <= self.delta < 1.0 - self.p:
            raise ScenarioError(f"delta must lie in [0, 1 - p) = [0, {1.0 - self.p}), got {self.delta}")


def make_unhappy_principal(params: UnhappyParams, specified: str = "misspecified") -> ContractInstance:
    """Two actions, rewards {0, 1, 2}; the lone belief is off by delta on the
    low-cost action's distribution (or equals the truth when correctly specified)."""
    p, c, d = params.p, params.c, params.delta
    f_good = [1.0 - p - d, p, d]
    f_bad = [p, 1.0 - p, 0.0]
    if specified == "correctly" or specified == "correct":
        belief = {"name": "F", "dists": [f_good, f_bad]}
    elif specified == "misspecified":
        belief = {"name": "B'", "dists": [f_good, [p - d, 1.0 - p, d]]}
    else:
        raise ScenarioError(f"specified must be 'correctly' or 'misspecified', got {specified!r}")
    return validate_instance(
        {
            "actions": [{"name": "a_g", "cost": c}, {"name": "a_b", "cost": 0.0}],
            "rewards": [0.0, 1.0, 2.0],
            "true_dists": [f_good, f_bad],
            "beliefs": [belief],
        }
    )


def unhappy_bounds(params: UnhappyParams) -> tuple[float, float, float]:
    """Closed-form optimal revenues (correct, misspecified) and their ratio."""
    p, c, d = params.p, params.c, params.delta
    correct = p + 2.0 * d - c
    misspec = max(1.0 - p, p + 2.0 * d - c * p / (2.0 * p - 1.0))
    return correct, misspec, correct / misspec


def make_divergence_instance() -> tuple[ContractInstance, Contract]:
    """Three-action environment whose learning dynamics cycle forever.

    Each action deterministically yields its own reward; belief j is correct
    about action j, believes action j-1 mostly produces reward j (0.125/0.875
    split), and believes action j+1 routes most mass (0.25/0.75) to a
    fictitious reward that no action can actually produce.  Every real reward
    pays 1 and the fictitious reward pays 0, so the chosen action is the one
    whose fictitious-believing belief currently has the least posterior mass.
    """
    n = 3
    rewards = [0.0, 1.0, 2.0, 3.0]  # last entry is the fictitious reward
    true_dists = []
    for i in range(n):
        row = [0.0] * 4
        row[i] = 1.0
        true_dists.append(row)
    beliefs = []
    for j in range(n):
        dists = []
        for i in range(n):
            row = [0.0] * 4
            if j == i:
                row[i] = 1.0
            elif j == (i + 1) % 3:
                row[i] = 0.125
                row[(i + 1) % 3] = 0.875
            else:  # j == (i + 2) % 3: mass routed to the fictitious reward
                row[i] = 0.25
                row[3] = 0.75
            dists.append(row)
        beliefs.append({"name": f"B{j}", "dists": dists})
    inst = validate_instance(
        {
            "actions": [{"name": f"a{i}", "cost": 0.0} for i in range(n)],
            "rewards": rewards,
            "true_dists": true_dists,
            "beliefs": beliefs,
        }
    )
    contract = validate_contract([1.0, 1.0, 1.0, 0.0], inst.n_rewards)
    return inst, contract


@dataclass(frozen=True)
class GameMatrices:
    """Bimatrix game payoffs: Y for the row player, Z for the column player."""

    y: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if y.ndim != 2 or y.shape[0] != y.shape[1] or y.shape != z.shape:
            raise ScenarioError("Y and Z must be square matrices of equal dimension")
        if np.any(y < 0) or np.any(z < 0) or not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise ScenarioError("payoff entries must be finite and nonnegative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.y.shape[0]


def round_game(game: GameMatrices, eps_star: float, kappa: float = 7.0) -> GameMatrices:
    """Entrywise floor(entry / (eps_star / kappa)) + 1 on both payoff matrices."""
    if eps_star <= 0:
        raise ScenarioError("eps_star must be positive")
    step = eps_star / kappa
    return GameMatrices(y=np.floor(game.y / step) + 1.0, z=np.floor(game.z / step) + 1.0)


@dataclass(frozen=True)
class ReductionOutput:
    """Contract-design instance embedding a bimatrix game."""

    instance: ContractInstance
    contract: Contract
    k: int
    e_tilde: float
    action_map: tuple[int, ...]   # game row i -> instance action index
    belief_map: tuple[int, ...]   # game column j -> instance belief index
    reward_layout: tuple[tuple[int, ...], ...]  # per action: indices of r_0 .. r_n

    def to_dict(self) -> dict:
        return {
            "instance": self.instance.to_dict(),
            "contract": self.contract.to_list(),
            "k": self.k,
            "e_tilde": self.e_tilde,
            "action_map": list(self.action_map),
            "belief_map": list(self.belief_map),
            "reward_layout": [list(block) for block in self.reward_layout],
        }


@dataclass(frozen=True)
class ReductionReport:
    """Deviations of the embedded utilities and divergences from the game payoffs."""

    passed: bool
    eps_prime: float
    max_utility_deviation: float
    max_kl_deviation: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "eps_prime": self.eps_prime,
            "max_utility_deviation": self.max_utility_deviation,
            "max_kl_deviation": self.max_kl_deviation,
        }


def _check_rounded(tilde: GameMatrices) -> None:
    z = tilde.z
    if np.any(np.abs(z - np.round(z)) > 1e-12) or np.any(z < 1):
        raise ScenarioError("Z entries must be integers >= 1 (round the game first)")


def build_reduction(tilde: GameMatrices, k: int) -> ReductionOutput:
    """Construct the embedding for a fixed truncation parameter ``k``.

    Per action a_i there is a block of n + 1 rewards; the truth puts mass
    1 - n * e~^-k on the block's zero-pay reward and e~^-k on each other
    reward, and belief j shifts mass between the zero-pay reward and reward j
    so that the single-action divergence lands near Z[i, j] while the
    contract pays Y[i, j] there in expectation.
    """
    _check_rounded(tilde)
    n = tilde.n
    e_tilde = math.ceil(math.e * 2**k) / 2**k
    tail = e_tilde**-k
    if 1.0 - n * tail <= 0:
        raise ScenarioError(f"k = {k} too small: true distribution mass would be negative")

    denom = np.empty((n, n))  # 1 - (n-1) tail - e~^-Z[i, j]
    for i in range(n):
        for j in range(n):
            denom[i, j] = 1.0 - (n - 1) * tail - e_tilde ** -tilde.z[i, j]
    if np.any(denom <= 0):
        raise ScenarioError(f"k = {k} too small: a belief probability would be negative")

    n_rewards = n * (n + 1)
    layout = tuple(tuple(i * (n + 1) + j for j in range(n + 1)) for i in range(n))
    rewards = [float(t) for t in range(n_rewards)]

    true_dists = np.zeros((n, n_rewards))
    for i in range(n):
        true_dists[i, layout[i][0]] = 1.0 - n * tail
        for j in range(1, n + 1):
            true_dists[i, layout[i][j]] = tail

    beliefs = []
    for j in range(n):
        dists = np.zeros((n, n_rewards))
        for i in range(n):
            dists[i, layout[i][0]] = e_tilde ** -tilde.z[i, j]
            for jp in range(1, n + 1):
                dists[i, layout[i][jp]] = tail
            dists[i, layout[i][j + 1]] = denom[i, j]
        beliefs.append({"name": f"B{j}", "dists": dists.tolist()})

    payments = np.zeros(n_rewards)
    for i in range(n):
        for j in range(n):
            payments[layout[i][j + 1]] = tilde.y[i, j] / denom[i, j]

    inst = validate_instance(
        {
            "actions": [{"name": f"a{i}", "cost": 0.0} for i in range(n)],
            "rewards": rewards,
            "true_dists": true_dists.tolist(),
            "beliefs": beliefs,
        }
    )
    return ReductionOutput(
        instance=inst,
        contract=validate_contract(payments, n_rewards),
        k=k,
        e_tilde=e_tilde,
        action_map=tuple(range(n)),
        belief_map=tuple(range(n)),
        reward_layout=layout,
    )


def verify_reduction(out: ReductionOutput, tilde: GameMatrices, eps_prime: float) -> ReductionReport:
    """Check |V(a_i, B_j, P) - Y[i, j]| and |KL_i(B_j) - Z[i, j]| for all pairs."""
    n = tilde.n
    if out.instance.n_actions != n or out.instance.n_beliefs != n:
        raise ScenarioError("reduction output and game dimensions do not match")
    max_v = 0.0
    max_kl = 0.0
    for j in range(n):
        profile = kl_profile(out.instance, out.belief_map[j]).kl_by_action
        for i in range(n):
            v = agent_utility(out.instance, out.action_map[i], out.belief_map[j], out.contract)
            max_v = max(max_v, abs(v - tilde.y[i, j]))
            max_kl = max(max_kl, abs(float(profile[i]) - tilde.z[i, j]))
    return ReductionReport(
        passed=bool(max_v <= eps_prime and max_kl <= eps_prime),
        eps_prime=eps_prime,
        max_utility_deviation=max_v,
        max_kl_deviation=max_kl,
    )


def game_to_contract(tilde: GameMatrices, eps_prime: float) -> ReductionOutput:
    """Embed a rounded game, doubling the truncation parameter until the
    deviation bounds verify at ``eps_prime``; self-certifying by construction."""
    if eps_prime <= 0:
        raise ScenarioError("eps_prime must be positive")
    _check_rounded(tilde)
    k = max(4, math.ceil(math.log2(4 * tilde.n)))
    while k <= 64:
        try:
            out = build_reduction(tilde, k)
        except ScenarioError:
            k *= 2
            continue
        if verify_reduction(out, tilde, eps_prime).passed:
            return out
        k *= 2
    raise ScenarioError(
        f"no truncation parameter k <= 64 meets eps_prime = {eps_prime};"
        " the requested precision is out of reach"
    )
