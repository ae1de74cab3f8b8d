"""Synthetic contextual bandit with a fixed random nonlinear reward surface.

Contexts are standard normal vectors. The mean reward of action ``a`` is a
fixed random one-hidden-layer network ``f(x)[a] = V[a] . tanh(W x + b) / sqrt(h)``
drawn from ``reward_function_seed``; logged rewards add Gaussian noise.

The behavior policy is a softmax over the reward scores plus a fixed random
linear perturbation of the context, so it prefers good actions without being
aligned with any evaluation policy. Evaluation policies are softmaxes over the
noiseless scores with an inverse temperature ``beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import BLOCK_SIZE, BanditDataset, block_rng
from ..estimators import OpeEstimator, make_estimator


def _default_bandwidths() -> tuple[float, ...]:
    return tuple(0.25 * 2.0**k for k in range(8))


@dataclass(frozen=True)
class BanditConfig:
    feature_dim: int = 10
    num_actions: int = 5
    reward_function_seed: int = 0
    bandwidths: tuple[float, ...] = field(default_factory=_default_bandwidths)
    noise_std: float = 0.5
    hidden_units: int = 16
    behavior_temperature: float = 1.0
    behavior_perturbation: float = 0.5

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.num_actions < 2:
            raise ValueError("num_actions must be >= 2")
        bw = tuple(float(b) for b in self.bandwidths)
        if not bw or min(bw) <= 0:
            raise ValueError("bandwidths must be strictly positive")
        if any(b2 <= b1 for b1, b2 in zip(bw, bw[1:])):
            raise ValueError("bandwidths must be sorted strictly ascending")
        object.__setattr__(self, "bandwidths", bw)
        if self.noise_std < 0 or self.behavior_temperature <= 0:
            raise ValueError("noise_std must be >= 0 and behavior_temperature > 0")


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class BanditPolicy:
    """Softmax policy ``softmax(beta * scores(x))``; ``beta=inf`` is greedy."""

    def __init__(self, scores, beta: float, name: str = ""):
        self._scores = scores
        self.beta = float(beta)
        self.name = name or f"softmax:{beta:g}"

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        s = self._scores(np.atleast_2d(contexts))
        if math.isinf(self.beta):
            out = np.zeros_like(s)
            out[np.arange(len(s)), s.argmax(axis=1)] = 1.0
            return out
        return _softmax(self.beta * s)

    def __repr__(self):
        return f"BanditPolicy({self.name})"


class BanditProblem:
    def __init__(self, config: BanditConfig = BanditConfig()):
        self.config = config
        rng = np.random.default_rng(config.reward_function_seed)
        d, h, A = config.feature_dim, config.hidden_units, config.num_actions
        self._W = rng.normal(size=(h, d)) / math.sqrt(d)
        self._b = rng.normal(size=h)
        self._V = rng.normal(size=(A, h))
        self._U = rng.normal(size=(A, d)) / math.sqrt(d)
        self.behavior = BanditPolicy(self._behavior_scores, 1.0 / config.behavior_temperature, "behavior")

    @property
    def num_actions(self) -> int:
        return self.config.num_actions

    def mean_rewards(self, contexts: np.ndarray) -> np.ndarray:
        """Noiseless reward of every action, shape ``(n, A)``."""
        hidden = np.tanh(np.atleast_2d(contexts) @ self._W.T + self._b)
        return hidden @ self._V.T / math.sqrt(self.config.hidden_units)

    def _behavior_scores(self, contexts):
        return self.mean_rewards(contexts) + self.config.behavior_perturbation * contexts @ self._U.T

    def softmax_policy(self, beta: float) -> BanditPolicy:
        return BanditPolicy(self.mean_rewards, beta)

    def sample(self, n: int, seed: int, policy: BanditPolicy | None = None) -> BanditDataset:
        """Log ``n`` rounds under ``policy`` (the behavior policy by default)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        policy = self.behavior if policy is None else policy
        parts = []
        for block, start in enumerate(range(0, n, BLOCK_SIZE)):
            m = min(BLOCK_SIZE, n - start)
            rng = block_rng(seed, block)
            x = rng.normal(size=(m, self.config.feature_dim))
            probs = policy.action_probs(x)
            u = rng.random(m)
            cdf = np.cumsum(probs, axis=1)
            a = np.minimum((cdf < u[:, None] * cdf[:, -1:]).sum(axis=1), self.num_actions - 1)
            noise = rng.normal(size=m) * self.config.noise_std
            r = self.mean_rewards(x)[np.arange(m), a] + noise
            parts.append((x, a, probs[np.arange(m), a], r))
        x, a, p, r = (np.concatenate(c) for c in zip(*parts))
        return BanditDataset(x, a, p, r, self.num_actions)

    def true_value(self, policy: BanditPolicy, episodes: int = 10**6, seed: int = 0) -> tuple[float, float]:
        """Monte-Carlo value over contexts with the noiseless reward surface."""
        total, total_sq = 0.0, 0.0
        for block, start in enumerate(range(0, episodes, BLOCK_SIZE)):
            m = min(BLOCK_SIZE, episodes - start)
            x = block_rng(seed, block).normal(size=(m, self.config.feature_dim))
            v = np.einsum("na,na->n", policy.action_probs(x), self.mean_rewards(x))
            total += v.sum()
            total_sq += (v * v).sum()
        mean = total / episodes
        var = max(total_sq / episodes - mean * mean, 0.0) * episodes / max(episodes - 1, 1)
        return float(mean), float(math.sqrt(var / episodes))

    def v_max(self, seed: int = 0, n: int = 10_000) -> float:
        """Largest absolute logged reward on a calibration draw."""
        return float(np.abs(self.sample(n, seed).rewards).max())


@dataclass
class BanditSuite:
    problem: BanditProblem
    estimators: list[OpeEstimator]


def build_bandit(config: BanditConfig = BanditConfig()) -> BanditSuite:
    """Bandit problem plus one kernel direct-method estimator per bandwidth and IS."""
    problem = BanditProblem(config)
    ests = [make_estimator(f"dm-kernel:{bw:.12g}") for bw in config.bandwidths]
    ests.append(make_estimator("is"))
    return BanditSuite(problem, ests)
