"""Policy constructors shared by the built-in environments."""
from __future__ import annotations

import numpy as np

from ..core import TabularMdp, TabularPolicy


def noised_policy(policy: TabularPolicy, epsilon: float) -> TabularPolicy:
    """Mix ``policy`` with the uniform policy: ``(1 - eps) * pi + eps * uniform``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    A = policy.num_actions
    return TabularPolicy((1.0 - epsilon) * policy.probs + epsilon / A)


def greedy_policy(mdp: TabularMdp) -> TabularPolicy:
    """Stationary policy that is greedy for the full-horizon optimal values.

    Works on states, so it is only meaningful for fully observed MDPs. Ties go
    to the lowest action index.
    """
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    r = mdp.expected_reward
    v = np.zeros(S)
    q = np.zeros((S, A))
    for _ in range(H):
        q = r + mdp.discount * mdp.transition @ v
        q[mdp.absorbing] = 0.0
        v = q.max(axis=1)
    return TabularPolicy.deterministic(np.argmax(q, axis=1), A)


def state_occupancy(mdp: TabularMdp, state_policy: np.ndarray) -> np.ndarray:
    """Expected number of visits to each non-absorbing state within the horizon."""
    d = mdp.initial.copy()
    occ = np.zeros(mdp.num_states)
    P = np.einsum("sa,sat->st", state_policy, mdp.transition)
    for _ in range(mdp.horizon):
        d = np.where(mdp.absorbing, 0.0, d)
        occ += d
        d = d @ P
    return occ


def marginalize_policy(mdp: TabularMdp, state_policy: np.ndarray) -> TabularPolicy:
    """Project a state-level policy onto ``mdp``'s observations.

    Each observation's action distribution is the occupancy-weighted average
    of the state policy over the states sharing that observation; unvisited
    observations fall back to a plain average.
    """
    occ = state_occupancy(mdp, state_policy)
    O, A = mdp.num_observations, mdp.num_actions
    num = np.zeros((O, A))
    den = np.zeros(O)
    np.add.at(num, mdp.observation_map, occ[:, None] * state_policy)
    np.add.at(den, mdp.observation_map, occ)
    flat = np.zeros((O, A))
    np.add.at(flat, mdp.observation_map, state_policy)
    counts = np.bincount(mdp.observation_map, minlength=O)[:, None]
    flat /= counts
    out = np.where(den[:, None] > 1e-12, num / np.maximum(den, 1e-300)[:, None], flat)
    return TabularPolicy(out / out.sum(axis=1, keepdims=True))
