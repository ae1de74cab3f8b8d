"""Shared fixtures and small oracle helpers."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from opera.core import Dataset, Step, TabularMdp, TabularPolicy, Trajectory
from opera.estimators import OpeEstimator

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class Returns:
    """Bare list of returns that the bootstrap can resample."""

    def __init__(self, values):
        self.v = np.asarray(values, dtype=float)

    def __len__(self):
        return len(self.v)

    def subset(self, indices):
        return Returns(self.v[np.asarray(indices)])


def _mean(policy, data, seed):
    return float(data.v.mean())


def _max(policy, data, seed):
    return float(data.v.max())


MEAN = OpeEstimator("mean", _mean)
MAX = OpeEstimator("max", _max)


def constant(c: float, name: str = "const") -> OpeEstimator:
    return OpeEstimator(name, lambda policy, data, seed: float(c))


def chain_mdp(discount: float = 1.0) -> TabularMdp:
    """Two states, two actions, s0 -> s1 -> s1; reward +1 leaving s0 and -1 leaving s1."""
    P = np.zeros((2, 2, 2))
    P[:, :, 1] = 1.0
    R = np.zeros((2, 2, 2))
    R[0, :, 1] = 1.0
    R[1, :, 1] = -1.0
    return TabularMdp(P, R, np.array([1.0, 0.0]), horizon=2, discount=discount)


def make_traj(rewards, probs=None, obs=None, actions=None) -> Trajectory:
    H = len(rewards)
    probs = probs or [1.0] * H
    obs = obs or [0] * H
    actions = actions or [0] * H
    return Trajectory(tuple(
        Step(obs[t], obs[t], actions[t], probs[t], float(rewards[t]), obs[t], obs[t]) for t in range(H)
    ))


def dataset_of(trajs, num_observations=1, num_actions=2, discount=1.0) -> Dataset:
    return Dataset.from_trajectories(trajs, discount=discount, num_observations=num_observations,
                                     num_actions=num_actions)


@pytest.fixture
def chain():
    return chain_mdp()


@pytest.fixture
def half_policy():
    return TabularPolicy(np.array([[0.5, 0.5]]))


# -- acceptance reporting --------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, passed: bool, detail: str, part: str = "") -> bool:
    """Log one acceptance outcome; printed now and again in the terminal summary."""
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    label = f"criterion {criterion}" + (f" [{part}]" if part else "")
    print(f"{label}: {'PASS' if passed else 'FAIL'} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[criterion]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'PASS' if p else 'FAIL'} {d}" if name else d for name, p, d in parts)
        terminalreporter.write_line(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
