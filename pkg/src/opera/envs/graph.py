"""Layered binary graph with an absorbing terminal state.

State ``0`` is the start, layer ``t`` (``1 <= t <= T-1``) holds the odd state
``2t-1`` and the even state ``2t``, and ``2T`` is absorbing. Action 0 aims for
the odd child of the next layer, action 1 for the even child; with slipping
transitions the target parity flips with probability ``slip_prob``. Entering
an odd state pays +1, entering an even state pays -1. From the last layer
every action moves to ``2T`` and pays a +1 bonus decided by the parity of that
penultimate state. State ``2T-1`` is unreachable and only keeps the numbering.

Every episode therefore lasts exactly ``T`` steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import TabularMdp, TabularPolicy


@dataclass(frozen=True)
class GraphConfig:
    horizon: int = 4
    stochastic_transitions: bool = False
    stochastic_rewards: bool = False
    partially_observed: bool = False
    slip_prob: float = 0.25
    reward_noise_prob: float = 0.2
    penultimate_bonus_on_odd: bool = True
    discount: float = 1.0

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("graph horizon must be >= 2")
        for name in ("slip_prob", "reward_noise_prob"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {p}")


def build_graph(config: GraphConfig = GraphConfig()) -> TabularMdp:
    T = config.horizon
    S, A = 2 * T + 1, 2
    absorbing = 2 * T
    slip = config.slip_prob if config.stochastic_transitions else 0.0
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))

    def layer_states(t):
        return (0,) if t == 0 else (2 * t - 1, 2 * t)

    for t in range(T - 1):
        odd, even = 2 * t + 1, 2 * t + 2
        for s in layer_states(t):
            for a, (hit, miss) in enumerate(((odd, even), (even, odd))):
                P[s, a, hit] += 1.0 - slip
                P[s, a, miss] += slip
                R[s, a, odd] = 1.0
                R[s, a, even] = -1.0
    for s in layer_states(T - 1):
        bonus = (s % 2 == 1) == config.penultimate_bonus_on_odd
        P[s, :, absorbing] = 1.0
        R[s, :, absorbing] = 1.0 if bonus else 0.0
    P[absorbing, :, absorbing] = 1.0
    P[2 * T - 1, :, absorbing] = 1.0

    initial = np.zeros(S)
    initial[0] = 1.0
    if config.partially_observed:
        omap = np.array([(s + 1) // 2 for s in range(S)])
        omap[2 * T - 1] = T
        omap[absorbing] = T
    else:
        omap = None
    return TabularMdp(
        transition=P, reward=R, initial=initial, horizon=T, discount=config.discount,
        observation_map=omap,
        reward_flip_prob=config.reward_noise_prob if config.stochastic_rewards else 0.0,
    )


def graph_optimal_policy(mdp: TabularMdp) -> TabularPolicy:
    """Always take action 0."""
    return TabularPolicy.deterministic(np.zeros(mdp.num_observations, dtype=int), mdp.num_actions)
