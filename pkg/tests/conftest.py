"""Shared construction helpers for the test suite."""
from __future__ import annotations

import math

import numpy as np

from berknash import check_generic, validate_instance


def make_raw(true_dists, beliefs, costs=None, rewards=None, prior=None):
    """Assemble a raw instance description from distribution rows."""
    n_actions = len(true_dists)
    n_rewards = len(true_dists[0])
    if costs is None:
        costs = [0.0] * n_actions
    if rewards is None:
        rewards = [float(r) for r in range(n_rewards)]
    raw = {
        "actions": [{"name": f"a{i + 1}", "cost": costs[i]} for i in range(n_actions)],
        "rewards": rewards,
        "true_dists": true_dists,
        "beliefs": [
            {"name": f"B{k}", "dists": dists} for k, dists in enumerate(beliefs)
        ],
    }
    if prior is not None:
        raw["prior"] = prior
    return raw


def instance_with_profiles(profiles, costs=None):
    """Two-action, three-reward instance whose KL profiles hit given values.

    The truth is (0.5, 0.5, 0) for both actions; a belief with divergence K at
    an action scales the first two cells by exp(-K) and parks the rest on the
    third reward, so KL(F_a || B_a) = K up to one rounding.
    """
    truth = [0.5, 0.5, 0.0]

    def row(k):
        scale = math.exp(-k)
        return [0.5 * scale, 0.5 * scale, 1.0 - scale]

    beliefs = [[row(k1), row(k2)] for k1, k2 in profiles]
    return validate_instance(make_raw([truth, truth], beliefs, costs=costs))


def random_generic_instance(rng, n_rewards, n_beliefs, reward_scale=2.0, cost_scale=0.5):
    """Random two-action instance passing the genericity check."""
    while True:
        rewards = np.sort(rng.uniform(0.0, reward_scale, size=n_rewards))
        if len(np.unique(np.round(rewards, 9))) != n_rewards:
            continue
        raw = make_raw(
            rng.dirichlet(np.ones(n_rewards), size=2).tolist(),
            [rng.dirichlet(np.ones(n_rewards), size=2).tolist() for _ in range(n_beliefs)],
            costs=[float(rng.uniform(0, cost_scale)) for _ in range(2)],
            rewards=rewards.tolist(),
        )
        inst = validate_instance(raw)
        if check_generic(inst).passed:
            return inst
