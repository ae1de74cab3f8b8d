"""Built-in benchmark environments addressable by string id.

``make_environment("graph", {"horizon": 4})`` returns an :class:`Environment`
that knows how to build policies from short specs, log datasets and compute
ground-truth values. Policy specs:

``optimal``         the environment's optimal policy
``uniform``         uniform over actions
``noised:<eps>``    optimal policy mixed with uniform at rate ``eps``
``action:<a>``      always action ``a`` (tabular environments)
``softmax:<beta>``  softmax over noiseless rewards (bandit only)
``behavior``        the bandit's logging policy
"""
from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from ..core import TabularMdp, TabularPolicy, rollout, save_mdp, true_value_dp
from ..exceptions import ConfigError
from .bandit import BanditConfig, BanditPolicy, BanditProblem, BanditSuite, build_bandit
from .graph import GraphConfig, build_graph, graph_optimal_policy
from .policies import greedy_policy, marginalize_policy, noised_policy, state_occupancy
from .sepsis import SepsisConfig, SepsisDynamics, SepsisSimulator, build_sepsis

ENVIRONMENT_IDS = ("graph", "sepsis", "bandit")


def _parse_spec(spec: str) -> tuple[str, float | None]:
    name, _, arg = spec.partition(":")
    if not arg:
        return name, None
    try:
        return name, float(arg)
    except ValueError:
        raise ConfigError(f"bad policy spec {spec!r}") from None


class Environment:
    """Common interface over tabular and bandit environments."""

    id: str
    default_v_max: float

    def policy(self, spec: str):
        raise NotImplementedError

    def sample(self, policy, n: int, seed: int):
        raise NotImplementedError

    def truth(self, policy, seed: int = 0) -> tuple[float, float]:
        """``(value, stderr)``; stderr is 0 for exact values."""
        raise NotImplementedError

    def check_policy_spec(self, spec: str) -> None:
        self.policy(spec)


class TabularEnvironment(Environment):
    def __init__(self, env_id: str, mdp: TabularMdp, optimal: TabularPolicy, v_max: float, config):
        self.id = env_id
        self.mdp = mdp
        self.optimal = optimal
        self.default_v_max = float(v_max)
        self.config = config

    def policy(self, spec: str) -> TabularPolicy:
        name, arg = _parse_spec(spec)
        O, A = self.mdp.num_observations, self.mdp.num_actions
        if name == "optimal" and arg is None:
            return self.optimal
        if name == "uniform" and arg is None:
            return TabularPolicy.uniform(O, A)
        if name == "noised" and arg is not None:
            if not 0.0 <= arg <= 1.0:
                raise ConfigError(f"noise level must be in [0, 1] in {spec!r}")
            return noised_policy(self.optimal, arg)
        if name == "action" and arg is not None:
            if arg != int(arg) or not 0 <= arg < A:
                raise ConfigError(f"action out of range in {spec!r}")
            return TabularPolicy.deterministic(np.full(O, int(arg)), A)
        raise ConfigError(f"unknown policy spec {spec!r} for environment {self.id!r}")

    def sample(self, policy: TabularPolicy, n: int, seed: int):
        return rollout(self.mdp, policy, n, seed)

    def truth(self, policy: TabularPolicy, seed: int = 0) -> tuple[float, float]:
        return true_value_dp(self.mdp, policy), 0.0

    def export(self, path: str | Path) -> None:
        save_mdp(self.mdp, path)


class BanditEnvironment(Environment):
    truth_episodes = 10**6

    def __init__(self, suite: BanditSuite, config: BanditConfig):
        self.id = "bandit"
        self.suite = suite
        self.problem = suite.problem
        self.config = config
        self.default_v_max = self.problem.v_max()

    def policy(self, spec: str) -> BanditPolicy:
        name, arg = _parse_spec(spec)
        if name == "softmax" and arg is not None:
            return self.problem.softmax_policy(arg)
        if name == "optimal" and arg is None:
            return self.problem.softmax_policy(math.inf)
        if name == "uniform" and arg is None:
            return self.problem.softmax_policy(0.0)
        if name == "behavior" and arg is None:
            return self.problem.behavior
        raise ConfigError(f"unknown policy spec {spec!r} for environment 'bandit'")

    def sample(self, policy: BanditPolicy, n: int, seed: int):
        return self.problem.sample(n, seed, policy)

    def truth(self, policy: BanditPolicy, seed: int = 0) -> tuple[float, float]:
        return self.problem.true_value(policy, self.truth_episodes, seed)

    def export(self, path):
        raise ConfigError("the bandit environment has no tabular dynamics to export")


def _dataclass_from(cls, params: dict | None, env_id: str):
    params = dict(params or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise ConfigError(f"unknown {env_id} config keys: {sorted(unknown)}")
    for key, value in params.items():
        if isinstance(value, list):
            params[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if cls is SepsisConfig and isinstance(params.get("transition_params"), dict):
        params["transition_params"] = _dataclass_from(SepsisDynamics, params["transition_params"], "sepsis dynamics")
    try:
        return cls(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {env_id} config: {exc}") from None


def make_environment(env_id: str, config: dict | None = None) -> Environment:
    """Build a registered environment from a plain config mapping.

    Raises
    ------
    ConfigError
        For an unknown id or invalid config values.
    """
    if env_id == "graph":
        cfg = _dataclass_from(GraphConfig, config, env_id)
        mdp = build_graph(cfg)
        return TabularEnvironment("graph", mdp, graph_optimal_policy(mdp), cfg.horizon + 1, cfg)
    if env_id == "sepsis":
        cfg = _dataclass_from(SepsisConfig, config, env_id)
        sim = SepsisSimulator(cfg)
        return TabularEnvironment("sepsis", sim.mdp, sim.optimal_policy(), 1.0, cfg)
    if env_id == "bandit":
        cfg = _dataclass_from(BanditConfig, config, env_id)
        return BanditEnvironment(build_bandit(cfg), cfg)
    raise ConfigError(f"unknown environment id {env_id!r}; known: {', '.join(ENVIRONMENT_IDS)}")


__all__ = [
    "ENVIRONMENT_IDS", "BanditConfig", "BanditEnvironment", "BanditPolicy", "BanditProblem",
    "Environment", "GraphConfig", "SepsisConfig", "SepsisDynamics", "SepsisSimulator",
    "TabularEnvironment", "build_bandit", "build_graph", "build_sepsis", "graph_optimal_policy",
    "greedy_policy", "make_environment", "marginalize_policy", "noised_policy", "state_occupancy",
]
