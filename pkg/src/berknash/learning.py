"""Myopic Bayesian learning simulator.

The agent best-responds to its current posterior each round, observes a
reward drawn from the true distribution of the chosen action, and updates in
log space.  Log-space weights are essential: cycling instances drive
posterior ratios past 2**(hundreds), which would underflow normalized
probabilities.  For the same reason, expected-utility comparisons are made
pairwise in the log domain (positive and negative gap contributions are
log-sum-exp'd separately), so the argmax stays exact however concentrated
the posterior becomes.
"""
from __future__ import annotations

import math
from bisect import bisect_right
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .model import Contract, ContractInstance, validate_instance

TIE_TOL = 1e-12            # relative tolerance for utility ties (lexicographic winner)
INDIFFERENT_TOL = 1e-12    # belief indifference threshold for prior restriction
RNG_ALGORITHM = "philox4x64"

_NEG_INF = -np.inf


class SimulationError(RuntimeError):
    """Support failure or malformed simulation input."""


@dataclass(frozen=True)
class LogPosterior:
    """Belief weights as log-probabilities up to a shared additive constant."""

    log_weights: np.ndarray

    def probabilities(self) -> np.ndarray:
        lw = self.log_weights
        m = float(np.max(lw))
        if m == _NEG_INF:
            raise SimulationError("all belief weights are zero")
        w = np.exp(lw - m)
        return w / w.sum()


def uniform_log_posterior(inst: ContractInstance) -> LogPosterior:
    return LogPosterior(log_weights=np.log(inst.prior))


@dataclass(frozen=True)
class Trajectory:
    """One simulated learning run; fully determined by (instance, contract, seed)."""

    seed: int
    actions: np.ndarray             # a_t for t = 1..T (0-based indices)
    outcomes: np.ndarray            # realized reward indices
    freq: np.ndarray                # running empirical action frequency, (T, n_actions)
    switch_times: np.ndarray        # 1-based times t >= 2 with a_t != a_{t-1}
    final_log_posterior: LogPosterior
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def final_freq(self) -> np.ndarray:
        return self.freq[-1]

    def to_csv(self, path) -> None:
        n_actions = self.freq.shape[1]
        header = "t,action,outcome," + ",".join(f"freq_a{k + 1}" for k in range(n_actions))
        t = np.arange(1, self.horizon + 1)
        table = np.column_stack([t, self.actions + 1, self.outcomes, self.freq])
        fmt = ["%d", "%d", "%d"] + ["%.15g"] * n_actions
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt=fmt)


@dataclass(frozen=True)
class CycleStat:
    """Block of consecutive identical actions starting at a switch time."""

    switch_time: int
    block_length: int
    growth_ratio: float | None  # this block's length over the previous block's

    def to_dict(self) -> dict:
        return {
            "switch_time": self.switch_time,
            "block_length": self.block_length,
            "growth_ratio": self.growth_ratio,
        }


def _expected_payments(inst: ContractInstance, contract: Contract) -> np.ndarray:
    """Expected payment matrix, beliefs x actions."""
    return np.array([b.dists @ contract.payments for b in inst.beliefs])


def _log_gap_tables(inst: ContractInstance, contract: Contract) -> tuple[np.ndarray, np.ndarray]:
    """log|gap| split by sign, where gap[a, a2, B] = V(a, B, P) - V(a2, B, P)."""
    utils = _expected_payments(inst, contract) - inst.actions.costs[None, :]  # (nB, nA)
    gaps = utils.T[:, None, :] - utils.T[None, :, :]  # (nA, nA, nB)
    with np.errstate(divide="ignore"):
        log_pos = np.where(gaps > 0, np.log(np.where(gaps > 0, gaps, 1.0)), _NEG_INF)
        log_neg = np.where(gaps < 0, np.log(np.where(gaps < 0, -gaps, 1.0)), _NEG_INF)
    return log_pos, log_neg


def _lse_shifted(lw: list[float], offsets: list[float]) -> float:
    """log sum_B exp(lw[B] + offsets[B]), safe against -inf entries."""
    m = _NEG_INF
    for w, o in zip(lw, offsets):
        v = w + o
        if v > m:
            m = v
    if m == _NEG_INF:
        return _NEG_INF
    s = 0.0
    for w, o in zip(lw, offsets):
        v = w + o
        if v != _NEG_INF:
            s += math.exp(v - m)
    return m + math.log(s)


def _compare_log(lw: list[float], log_pos: list[float], log_neg: list[float]) -> int:
    """Sign of sum_B w_B * gap_B computed entirely in the log domain."""
    up = _lse_shifted(lw, log_pos)
    down = _lse_shifted(lw, log_neg)
    if up == _NEG_INF and down == _NEG_INF:
        return 0
    if up - down > TIE_TOL:
        return 1
    if down - up > TIE_TOL:
        return -1
    return 0


def _pick_action(lw: list[float], log_pos, log_neg, n_actions: int) -> int:
    """Lowest-index maximizer of posterior-expected utility.

    Pairwise log-domain comparisons; a challenger only displaces the incumbent
    by a strictly positive margin, so ties resolve lexicographically.
    """
    best = 0
    for a in range(1, n_actions):
        if _compare_log(lw, log_pos[a][best], log_neg[a][best]) > 0:
            best = a
    return best


def choose_action(inst: ContractInstance, contract: Contract, lp: LogPosterior) -> int:
    """Posterior-expected-utility maximizer, ties broken lexicographically.

    Utility comparisons happen in the log domain (relative tie tolerance
    1e-12 on the competing sums), so the choice matches exact arithmetic even
    when posterior ratios exceed the double-precision range.
    """
    lw = lp.log_weights
    if float(np.max(lw)) == _NEG_INF:
        raise SimulationError("all belief weights are zero")
    log_pos, log_neg = _log_gap_tables(inst, contract)
    return _pick_action(list(lw), log_pos.tolist(), log_neg.tolist(), inst.n_actions)


def posterior_update(
    inst: ContractInstance, lp: LogPosterior, action: int, outcome: int
) -> LogPosterior:
    """Bayes update in log space after observing reward ``outcome`` from ``action``."""
    likelihoods = np.array([b.dists[action, outcome] for b in inst.beliefs])
    with np.errstate(divide="ignore"):
        lw = lp.log_weights + np.log(likelihoods)
    if float(np.max(lw)) == _NEG_INF:
        raise SimulationError(
            f"every belief assigns probability 0 to outcome {outcome} under action {action}"
        )
    return LogPosterior(log_weights=lw)


def restrict_prior(
    inst: ContractInstance, contract: Contract
) -> tuple[ContractInstance, list[int]]:
    """Drop beliefs indifferent between the two actions; renormalize the prior.

    Indifferent beliefs shift both actions' posterior-expected utilities
    equally, so the restricted agent chooses the same actions as the original
    one on any shared outcome sequence.  Returns the restricted instance and
    the map from new belief indices to original ones.
    """
    if inst.n_actions != 2:
        raise SimulationError("prior restriction is defined for two-action instances")
    pays = _expected_payments(inst, contract)
    gaps = (pays[:, 0] - inst.actions.costs[0]) - (pays[:, 1] - inst.actions.costs[1])
    keep = [k for k in range(inst.n_beliefs) if abs(gaps[k]) > INDIFFERENT_TOL]
    if not keep:
        raise SimulationError("every belief is indifferent between the two actions")
    if len(keep) == inst.n_beliefs:
        return inst, list(range(inst.n_beliefs))
    raw = inst.to_dict()
    raw["beliefs"] = [raw["beliefs"][k] for k in keep]
    prior = inst.prior[keep]
    raw["prior"] = (prior / prior.sum()).tolist()
    return validate_instance(raw), keep


def _check_shared_support(inst: ContractInstance) -> None:
    true_support = inst.true_dists > 0
    for b in inst.beliefs:
        if np.all(b.dists[true_support] > 0):
            return
    raise SimulationError(
        "no belief shares support with every true reward distribution;"
        " Bayes updating could eliminate all beliefs"
    )


def simulate(inst: ContractInstance, contract: Contract, horizon: int, seed: int) -> Trajectory:
    """Run the myopic Bayesian learner for ``horizon`` rounds.

    Bit-reproducible for a fixed (instance, contract, seed): outcomes come
    from a counter-based Philox generator, one uniform draw per round.
    """
    if horizon < 1:
        raise SimulationError("horizon must be at least 1")
    _check_shared_support(inst)
    n_a, n_b = inst.n_actions, inst.n_beliefs
    log_pos_arr, log_neg_arr = _log_gap_tables(inst, contract)
    log_pos, log_neg = log_pos_arr.tolist(), log_neg_arr.tolist()
    with np.errstate(divide="ignore"):
        loglik = np.log(inst.belief_array())  # (nB, nA, nR); -inf where prob 0
    # update_table[a][r][B]: log-likelihood increments for observing r after a
    update_table = np.transpose(loglik, (1, 2, 0)).tolist()
    cum = np.cumsum(inst.true_dists, axis=1)
    cum_rows = cum.tolist()
    last_positive = [int(np.flatnonzero(inst.true_dists[a])[-1]) for a in range(n_a)]
    rng = np.random.Generator(np.random.Philox(seed))
    uniforms = rng.random(horizon).tolist()

    lw = [float(v) for v in np.log(inst.prior)]
    actions = np.empty(horizon, dtype=np.int64)
    outcomes = np.empty(horizon, dtype=np.int64)
    for t in range(horizon):
        a = _pick_action(lw, log_pos, log_neg, n_a)
        r = min(bisect_right(cum_rows[a], uniforms[t]), inst.n_rewards - 1)
        if inst.true_dists[a, r] == 0.0:  # cumulative-sum ties can land on a null cell
            r = last_positive[a]
        increments = update_table[a][r]
        lw = [w + inc for w, inc in zip(lw, increments)]
        if max(lw) == _NEG_INF:
            raise SimulationError(
                f"every belief assigns probability 0 to outcome {r} at step {t + 1}"
            )
        actions[t] = a
        outcomes[t] = r

    counts = np.zeros((horizon, n_a))
    counts[np.arange(horizon), actions] = 1.0
    freq = np.cumsum(counts, axis=0) / np.arange(1, horizon + 1)[:, None]
    switch_times = np.flatnonzero(actions[1:] != actions[:-1]) + 2  # 1-based step index
    return Trajectory(
        seed=seed,
        actions=actions,
        outcomes=outcomes,
        freq=freq,
        switch_times=switch_times,
        final_log_posterior=LogPosterior(log_weights=np.array(lw)),
    )


def cycle_stats(traj: Trajectory) -> list[CycleStat]:
    """Lengths of maximal constant-action blocks and consecutive-block ratios.

    The trailing block is truncated by the horizon and therefore excluded.
    Needs at least three switches.
    """
    if len(traj.switch_times) < 3:
        raise SimulationError(
            f"cycle statistics need at least 3 action switches, found {len(traj.switch_times)}"
        )
    times = np.concatenate([[1], traj.switch_times])
    lengths = np.diff(times)
    stats: list[CycleStat] = []
    for i, (start, length) in enumerate(zip(times[:-1], lengths)):
        ratio = float(lengths[i] / lengths[i - 1]) if i > 0 else None
        stats.append(
            CycleStat(switch_time=int(start), block_length=int(length), growth_ratio=ratio)
        )
    return stats
