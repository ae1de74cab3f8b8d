"""Experiment configuration files (JSON or TOML).

A minimal experiment::

    {
      "environment": {"id": "graph", "config": {"horizon": 4}},
      "behavior_policy": "noised:0.5",
      "evaluation_policies": ["noised:0.1"],
      "dataset_sizes": [512],
      "trials": 30,
      "estimators": ["is", "wis", {"id": "fqe", "folds": 2}],
      "bootstrap": {"n_bootstrap": 200, "eta": 0.5},
      "methods": ["opera", "best_ope", "avg_ope"],
      "seed": 0
    }

Everything is validated when the file is loaded, so a typo fails before any
simulation starts.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..aggregate import METHODS
from ..bootstrap import BootstrapPlan
from ..envs import Environment, make_environment
from ..estimators import OpeEstimator, make_estimator
from ..exceptions import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class EstimatorSpec:
    id: str
    params: dict = field(default_factory=dict)

    def build(self) -> OpeEstimator:
        return make_estimator(self.id, **self.params)

    @property
    def label(self) -> str:
        if not self.params:
            return self.id
        args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.id}[{args}]"


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str
    behavior_policy: str
    evaluation_policies: tuple[str, ...]
    dataset_sizes: tuple[int, ...]
    trials: int
    estimators: tuple[EstimatorSpec, ...]
    env_config: dict = field(default_factory=dict)
    bootstrap: BootstrapPlan = field(default_factory=BootstrapPlan)
    methods: tuple[str, ...] = ("opera", "best_ope", "avg_ope")
    center_estimator: str = "is"
    wis_estimator: str = "wis"
    seed: int = 0
    v_max: float | None = None
    output: str | None = None
    name: str = "experiment"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.dataset_sizes or min(self.dataset_sizes) < 1:
            raise ConfigError("dataset_sizes must be a nonempty list of positive counts")
        if not self.evaluation_policies:
            raise ConfigError("evaluation_policies must be nonempty")
        if len(set(self.evaluation_policies)) != len(self.evaluation_policies):
            raise ConfigError("evaluation_policies must not repeat")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; known: {', '.join(METHODS)}")
        if not self.estimators:
            raise ConfigError("estimators must be nonempty")
        if self.v_max is not None and not self.v_max > 0:
            raise ConfigError("v_max must be positive")
        for spec in self.estimators:
            spec.build()
        for extra in (self.center_estimator, self.wis_estimator):
            make_estimator(extra)

    def build_environment(self) -> Environment:
        env = make_environment(self.environment, self.env_config)
        for spec in (self.behavior_policy, *self.evaluation_policies):
            env.check_policy_spec(spec)
        return env

    @property
    def labels(self) -> list[str]:
        """Unique row labels for the base estimators."""
        ids = [s.id for s in self.estimators]
        return [s.id if ids.count(s.id) == 1 else s.label for s in self.estimators]


_TOP_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"env_config"}


def _estimator_spec(item) -> EstimatorSpec:
    if isinstance(item, str):
        return EstimatorSpec(item)
    if isinstance(item, dict) and "id" in item:
        params = {k: v for k, v in item.items() if k not in ("id", "params")}
        params.update(item.get("params", {}))
        return EstimatorSpec(str(item["id"]), params)
    raise ConfigError(f"estimator entries must be ids or objects with an 'id', got {item!r}")


def config_from_dict(d: dict, **overrides) -> ExperimentConfig:
    """Build and validate a config; ``overrides`` replace top-level keys."""
    d = {**d, **{k: v for k, v in overrides.items() if v is not None}}
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("environment", "behavior_policy", "evaluation_policies", "dataset_sizes", "trials", "estimators"):
        if key not in d:
            raise ConfigError(f"missing config key {key!r}")
    env = d["environment"]
    if isinstance(env, str):
        env_id, env_cfg = env, {}
    elif isinstance(env, dict) and "id" in env:
        extra = set(env) - {"id", "config"}
        if extra:
            raise ConfigError(f"unknown environment keys: {sorted(extra)}")
        env_id, env_cfg = env["id"], dict(env.get("config", {}))
    else:
        raise ConfigError("environment must be an id or an object with 'id' and 'config'")
    policies = d["evaluation_policies"]
    if isinstance(policies, str):
        policies = [policies]
    try:
        plan = BootstrapPlan(**d.get("bootstrap", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid bootstrap settings: {exc}") from None
    try:
        cfg = ExperimentConfig(
            environment=str(env_id),
            env_config=env_cfg,
            behavior_policy=str(d["behavior_policy"]),
            evaluation_policies=tuple(str(p) for p in policies),
            dataset_sizes=tuple(int(n) for n in d["dataset_sizes"]),
            trials=int(d["trials"]),
            estimators=tuple(_estimator_spec(e) for e in d["estimators"]),
            bootstrap=plan,
            methods=tuple(d.get("methods", ExperimentConfig.methods)),
            center_estimator=str(d.get("center_estimator", "is")),
            wis_estimator=str(d.get("wis_estimator", "wis")),
            seed=int(d.get("seed", 0)),
            v_max=None if d.get("v_max") is None else float(d["v_max"]),
            output=d.get("output"),
            name=str(d.get("name", "experiment")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from None
    cfg.build_environment()
    return cfg


def read_config_file(path: str | Path) -> dict:
    """Parse a ``.json`` or ``.toml`` file into a plain mapping."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        if p.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{p}: {exc}") from None


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    return config_from_dict(read_config_file(path), **overrides)
