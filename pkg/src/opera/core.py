"""Decision processes, logged datasets and ground-truth policy values.

Everything here is tabular and finite-horizon. A :class:`TabularMdp` holds dense
``(S, A, S)`` transition and reward tables; partial observability is expressed
through ``observation_map``, which collapses states onto observation ids.
Policies are always defined on observations.

Datasets are stored as padded ``(n, H)`` arrays so that estimators and the
bootstrap can work on index arrays instead of Python objects.
:class:`Trajectory` and :class:`Step` exist for construction and inspection.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ConfigError

PROB_ATOL = 1e-9

# Episodes are simulated in fixed blocks, one RNG stream per block, so the
# output never depends on how blocks are scheduled.
BLOCK_SIZE = 4096


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def block_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def derive_seed(seed: int, *keys: int) -> int:
    """Integer seed for the stream ``(seed, *keys)``, for APIs that take ints."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def _sample_rows(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one draw per row of ``cdf``.

    ``u`` is rescaled by each row's total so zero-probability entries can
    never be selected because of round-off at the top of the CDF.
    """
    target = u * cdf[:, -1]
    return np.argmax(cdf > target[:, None], axis=1)


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite-horizon tabular decision process.

    Parameters
    ----------
    transition : array of shape (S, A, S)
        ``transition[s, a, s']`` is the probability of moving to ``s'``.
    reward : array of shape (S, A, S)
        Reward received on the transition ``(s, a, s')``.
    initial : array of shape (S,)
        Initial state distribution.
    horizon : int
        Maximum number of steps per episode.
    discount : float
        Discount factor in (0, 1].
    observation_map : array of shape (S,), optional
        Observation id of each state. Defaults to the identity (fully observed).
    reward_flip_prob : float, default 0
        Probability that a realized reward has its sign flipped. The expected
        reward is therefore ``(1 - 2 p) * reward``.

    States whose every action self-loops with probability one and zero reward
    are absorbing: episodes stop on entering them.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial: np.ndarray
    horizon: int
    discount: float
    observation_map: np.ndarray | None = None
    reward_flip_prob: float = 0.0
    absorbing: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        T = np.array(self.transition, dtype=float)
        R = np.array(self.reward, dtype=float)
        mu = np.array(self.initial, dtype=float)
        if T.ndim != 3 or T.shape[0] != T.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {T.shape}")
        S, A, _ = T.shape
        if R.shape != T.shape:
            raise ValueError(f"reward shape {R.shape} does not match transition {T.shape}")
        if mu.shape != (S,):
            raise ValueError(f"initial must have shape ({S},), got {mu.shape}")
        if np.any(T < 0):
            s, a, _ = np.argwhere(T < 0)[0]
            raise ValueError(f"transition[{s}][{a}] has a negative entry")
        rows = T.sum(axis=2)
        bad = np.argwhere(np.abs(rows - 1.0) > PROB_ATOL)
        if len(bad):
            s, a = bad[0]
            raise ValueError(f"transition[{s}][{a}] sums to {rows[s, a]!r}, expected 1")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > PROB_ATOL:
            raise ValueError(f"initial must be a distribution, sums to {mu.sum()!r}")
        if not np.all(np.isfinite(R)):
            raise ValueError("reward contains non-finite entries")
        horizon = int(self.horizon)
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not 0.0 < float(self.discount) <= 1.0:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if not 0.0 <= float(self.reward_flip_prob) < 1.0:
            raise ValueError("reward_flip_prob must be in [0, 1)")
        if self.observation_map is None:
            omap = np.arange(S)
        else:
            omap = np.array(self.observation_map)
            if omap.shape != (S,) or not np.issubdtype(omap.dtype, np.integer):
                raise ValueError(f"observation_map must be {S} integer ids")
            if omap.min() < 0:
                raise ValueError("observation ids must be non-negative")
            missing = np.setdiff1d(np.arange(omap.max() + 1), omap)
            if len(missing):
                raise ValueError(f"observation_map is not surjective; missing ids {missing.tolist()}")

        eye = np.eye(S)[:, None, :]
        absorbing = np.all(np.abs(T - eye) <= PROB_ATOL, axis=(1, 2)) & np.all(
            np.abs(R) * T <= PROB_ATOL, axis=(1, 2)
        )

        object.__setattr__(self, "transition", _readonly(T))
        object.__setattr__(self, "reward", _readonly(R))
        object.__setattr__(self, "initial", _readonly(mu))
        object.__setattr__(self, "observation_map", _readonly(omap.astype(np.int64)))
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "reward_flip_prob", float(self.reward_flip_prob))
        object.__setattr__(self, "absorbing", _readonly(absorbing))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def num_observations(self) -> int:
        return int(self.observation_map.max()) + 1

    @property
    def expected_reward(self) -> np.ndarray:
        """Mean reward of each ``(s, a)`` pair, shape (S, A)."""
        return (1.0 - 2.0 * self.reward_flip_prob) * np.einsum("sat,sat->sa", self.transition, self.reward)

    def to_dict(self) -> dict:
        d = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "horizon": self.horizon,
            "discount": self.discount,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "initial": self.initial.tolist(),
            "observation_map": self.observation_map.tolist(),
        }
        if self.reward_flip_prob:
            d["reward_flip_prob"] = self.reward_flip_prob
        return d


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Stationary stochastic policy over observation ids, ``probs[o, a]``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError(f"probs must be 2-D (observations, actions), got shape {p.shape}")
        if np.any(p < 0):
            raise ValueError("policy has negative probabilities")
        sums = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_ATOL)
        if len(bad):
            raise ValueError(f"policy row {bad[0]} sums to {sums[bad[0]]!r}, expected 1")
        object.__setattr__(self, "probs", _readonly(p))

    @property
    def num_observations(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, num_observations: int, num_actions: int) -> "TabularPolicy":
        return cls(np.full((num_observations, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], num_actions: int) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=int)
        p = np.zeros((len(actions), num_actions))
        p[np.arange(len(actions)), actions] = 1.0
        return cls(p)

    def on_states(self, mdp: TabularMdp) -> np.ndarray:
        """Action probabilities per underlying state, shape (S, A)."""
        if self.num_observations != mdp.num_observations or self.num_actions != mdp.num_actions:
            raise ValueError(
                f"policy shape {self.probs.shape} does not match MDP "
                f"({mdp.num_observations} observations, {mdp.num_actions} actions)"
            )
        return self.probs[mdp.observation_map]


@dataclass(frozen=True)
class Step:
    state: int
    observation: int
    action: int
    behavior_prob: float
    reward: float
    next_state: int
    next_observation: int


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.steps) < 1:
            raise ValueError("a trajectory needs at least one step")

    def __len__(self):
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]


def discounted_return(traj: Trajectory | Sequence[float], discount: float) -> float:
    """Discounted return ``sum_t discount**t * r_t`` of a trajectory or reward list."""
    if not 0.0 < discount <= 1.0:
        raise ValueError(f"discount must be in (0, 1], got {discount}")
    rewards = traj.rewards if isinstance(traj, Trajectory) else list(traj)
    total, g = 0.0, 1.0
    for r in rewards:
        total += g * r
        g *= discount
    return total


class Dataset:
    """A batch of logged trajectories in padded array form.

    All per-step arrays have shape ``(n, horizon)``; entries past a
    trajectory's length are padding (action 0, probability 1, reward 0) and
    are excluded by :attr:`mask`.
    """

    _FIELDS = ("states", "observations", "actions", "behavior_probs", "rewards",
               "next_states", "next_observations")

    def __init__(self, *, states, observations, actions, behavior_probs, rewards,
                 next_states, next_observations, lengths, discount, horizon,
                 num_observations, num_actions):
        self.lengths = np.asarray(lengths, dtype=np.int64)
        n = len(self.lengths)
        if n < 1:
            raise ValueError("a dataset needs at least one trajectory")
        self.discount = float(discount)
        self.horizon = int(horizon)
        self.num_observations = int(num_observations)
        self.num_actions = int(num_actions)
        if self.lengths.min() < 1 or self.lengths.max() > self.horizon:
            raise ValueError("trajectory lengths must lie in [1, horizon]")
        self.states = np.asarray(states, dtype=np.int64)
        self.observations = np.asarray(observations, dtype=np.int64)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.behavior_probs = np.asarray(behavior_probs, dtype=float)
        self.rewards = np.asarray(rewards, dtype=float)
        self.next_states = np.asarray(next_states, dtype=np.int64)
        self.next_observations = np.asarray(next_observations, dtype=np.int64)
        for name in self._FIELDS:
            a = getattr(self, name)
            if a.shape != (n, self.horizon):
                raise ValueError(f"{name} has shape {a.shape}, expected {(n, self.horizon)}")
            a.setflags(write=False)
        self.lengths.setflags(write=False)
        self.mask = _readonly(np.arange(self.horizon)[None, :] < self.lengths[:, None])
        if np.any((self.behavior_probs < 0) | (self.behavior_probs > 1)):
            raise ValueError("behavior probabilities must lie in [0, 1]")
        for name, bound in (("observations", self.num_observations),
                            ("next_observations", self.num_observations),
                            ("actions", self.num_actions)):
            a = getattr(self, name)[self.mask]
            if a.min() < 0 or a.max() >= bound:
                raise ValueError(f"{name} out of range [0, {bound})")

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def n(self) -> int:
        return len(self.lengths)

    def __repr__(self):
        return (f"Dataset(n={self.n}, horizon={self.horizon}, discount={self.discount}, "
                f"observations={self.num_observations}, actions={self.num_actions})")

    def _meta(self) -> dict:
        return dict(discount=self.discount, horizon=self.horizon,
                    num_observations=self.num_observations, num_actions=self.num_actions)

    def subset(self, indices) -> "Dataset":
        """Dataset made of the trajectories at ``indices`` (repeats allowed)."""
        idx = np.asarray(indices, dtype=np.int64)
        arrays = {name: getattr(self, name)[idx] for name in self._FIELDS}
        return Dataset(**arrays, lengths=self.lengths[idx], **self._meta())

    def returns(self) -> np.ndarray:
        """Discounted return of every trajectory, shape (n,)."""
        g = self.discount ** np.arange(self.horizon)
        return (self.rewards * self.mask) @ g

    @property
    def trajectories(self) -> list[Trajectory]:
        out = []
        for i, length in enumerate(self.lengths):
            out.append(Trajectory(tuple(
                Step(int(self.states[i, t]), int(self.observations[i, t]), int(self.actions[i, t]),
                     float(self.behavior_probs[i, t]), float(self.rewards[i, t]),
                     int(self.next_states[i, t]), int(self.next_observations[i, t]))
                for t in range(length)
            )))
        return out

    @classmethod
    def from_trajectories(cls, trajectories: Iterable[Trajectory], *, discount: float,
                          horizon: int | None = None, num_observations: int | None = None,
                          num_actions: int | None = None) -> "Dataset":
        trajs = list(trajectories)
        if not trajs:
            raise ValueError("a dataset needs at least one trajectory")
        H = horizon if horizon is not None else max(len(t) for t in trajs)
        n = len(trajs)
        arrays = {
            "states": np.zeros((n, H), np.int64),
            "observations": np.zeros((n, H), np.int64),
            "actions": np.zeros((n, H), np.int64),
            "behavior_probs": np.ones((n, H)),
            "rewards": np.zeros((n, H)),
            "next_states": np.zeros((n, H), np.int64),
            "next_observations": np.zeros((n, H), np.int64),
        }
        lengths = np.zeros(n, np.int64)
        for i, traj in enumerate(trajs):
            if len(traj) > H:
                raise ValueError(f"trajectory {i} is longer than horizon {H}")
            lengths[i] = len(traj)
            for t, s in enumerate(traj.steps):
                arrays["states"][i, t] = s.state
                arrays["observations"][i, t] = s.observation
                arrays["actions"][i, t] = s.action
                arrays["behavior_probs"][i, t] = s.behavior_prob
                arrays["rewards"][i, t] = s.reward
                arrays["next_states"][i, t] = s.next_state
                arrays["next_observations"][i, t] = s.next_observation
        if num_observations is None:
            num_observations = int(max(arrays["observations"].max(), arrays["next_observations"].max())) + 1
        if num_actions is None:
            num_actions = int(arrays["actions"].max()) + 1
        return cls(**arrays, lengths=lengths, discount=discount, horizon=H,
                   num_observations=num_observations, num_actions=num_actions)

    @classmethod
    def concatenate(cls, parts: Sequence["Dataset"]) -> "Dataset":
        first = parts[0]
        arrays = {name: np.concatenate([getattr(p, name) for p in parts]) for name in cls._FIELDS}
        return cls(**arrays, lengths=np.concatenate([p.lengths for p in parts]), **first._meta())


def q_values_dp(mdp: TabularMdp, policy: TabularPolicy) -> np.ndarray:
    """Finite-horizon action values by backward induction.

    Returns an array ``Q`` of shape ``(H + 1, S, A)`` where ``Q[h]`` is the
    expected discounted return with ``h`` steps to go; ``Q[0] = 0``.
    """
    pi = policy.on_states(mdp)
    H = mdp.horizon
    r = mdp.expected_reward
    Q = np.zeros((H + 1, mdp.num_states, mdp.num_actions))
    for h in range(1, H + 1):
        v_next = np.einsum("sa,sa->s", pi, Q[h - 1])
        v_next[mdp.absorbing] = 0.0
        Q[h] = r + mdp.discount * mdp.transition @ v_next
        Q[h, mdp.absorbing] = 0.0
    return Q


def true_value_dp(mdp: TabularMdp, policy: TabularPolicy) -> float:
    """Exact value ``J(policy)`` by H-step backward induction over states."""
    if mdp.horizon == 0:
        raise ValueError("empty horizon")
    Q = q_values_dp(mdp, policy)
    v0 = np.einsum("sa,sa->s", policy.on_states(mdp), Q[-1])
    return float(mdp.initial @ v0)


def return_variance_dp(mdp: TabularMdp, policy: TabularPolicy) -> float:
    """Exact variance of the discounted return, by backward induction on the
    first two moments."""
    if mdp.horizon == 0:
        raise ValueError("empty horizon")
    pi = policy.on_states(mdp)
    P, R, g = mdp.transition, mdp.reward, mdp.discount
    mean_r = (1.0 - 2.0 * mdp.reward_flip_prob) * R
    live = ~mdp.absorbing
    v1 = np.zeros(mdp.num_states)
    v2 = np.zeros(mdp.num_states)
    for _ in range(mdp.horizon):
        m1 = np.einsum("sat,sat->sa", P, mean_r + g * v1[None, None, :])
        m2 = np.einsum("sat,sat->sa", P, R ** 2 + 2 * g * mean_r * v1[None, None, :] + g * g * v2[None, None, :])
        v1 = np.where(live, np.einsum("sa,sa->s", pi, m1), 0.0)
        v2 = np.where(live, np.einsum("sa,sa->s", pi, m2), 0.0)
    first, second = mdp.initial @ v1, mdp.initial @ v2
    return float(max(second - first ** 2, 0.0))


def _simulate_block(mdp: TabularMdp, pi_states: np.ndarray, m: int, rng: np.random.Generator,
                    record: bool):
    H = mdp.horizon
    init_cdf = np.cumsum(mdp.initial)[None, :]
    pi_cdf = np.cumsum(pi_states, axis=1)
    T_cdf = np.cumsum(mdp.transition, axis=2)
    u0 = rng.random(m)
    # fixed number of draws per step regardless of termination
    u = rng.random((H, 3, m))
    s = _sample_rows(np.broadcast_to(init_cdf, (m, mdp.num_states)), u0)
    alive = np.ones(m, dtype=bool)
    lengths = np.zeros(m, np.int64)
    g = np.zeros(m)
    gamma_t = 1.0
    if record:
        out = {k: np.zeros((m, H), np.int64) for k in ("states", "actions", "next_states")}
        out["behavior_probs"] = np.ones((m, H))
        out["rewards"] = np.zeros((m, H))
    for t in range(H):
        if not alive.any():
            break
        a = _sample_rows(pi_cdf[s], u[t, 0])
        bp = pi_states[s, a]
        s_next = _sample_rows(T_cdf[s, a], u[t, 1])
        r = mdp.reward[s, a, s_next]
        if mdp.reward_flip_prob > 0:
            r = np.where(u[t, 2] < mdp.reward_flip_prob, -r, r)
        r = np.where(alive, r, 0.0)
        g += gamma_t * r
        gamma_t *= mdp.discount
        if record:
            out["states"][:, t] = np.where(alive, s, 0)
            out["actions"][:, t] = np.where(alive, a, 0)
            out["behavior_probs"][:, t] = np.where(alive, bp, 1.0)
            out["rewards"][:, t] = r
            out["next_states"][:, t] = np.where(alive, s_next, 0)
        lengths += alive
        alive = alive & ~mdp.absorbing[s_next]
        s = np.where(alive, s_next, s)
    if record:
        return g, lengths, out
    return g, lengths, None


def _check_episodes(mdp: TabularMdp, n: int, seed: int):
    if n < 1:
        raise ValueError("need at least one episode")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if mdp.horizon < 1:
        raise ValueError("empty horizon")


def rollout(mdp: TabularMdp, policy: TabularPolicy, n: int, seed: int) -> Dataset:
    """Sample ``n`` trajectories of ``policy`` on ``mdp``.

    Each step logs the policy's probability of the sampled action at the
    current observation. Deterministic in ``seed``.
    """
    _check_episodes(mdp, n, seed)
    pi_states = policy.on_states(mdp)
    parts, lens = [], []
    for b, start in enumerate(range(0, n, BLOCK_SIZE)):
        m = min(BLOCK_SIZE, n - start)
        _, lengths, out = _simulate_block(mdp, pi_states, m, block_rng(seed, b), record=True)
        parts.append(out)
        lens.append(lengths)
    arrays = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    lengths = np.concatenate(lens)
    omap = mdp.observation_map
    mask = np.arange(mdp.horizon)[None, :] < lengths[:, None]
    arrays["observations"] = np.where(mask, omap[arrays["states"]], 0)
    arrays["next_observations"] = np.where(mask, omap[arrays["next_states"]], 0)
    return Dataset(**arrays, lengths=lengths, discount=mdp.discount, horizon=mdp.horizon,
                   num_observations=mdp.num_observations, num_actions=mdp.num_actions)


def true_value_mc(mdp: TabularMdp, policy: TabularPolicy, episodes: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of ``J(policy)``: ``(mean return, standard error)``."""
    _check_episodes(mdp, episodes, seed)
    pi_states = policy.on_states(mdp)
    returns = np.concatenate([
        _simulate_block(mdp, pi_states, min(BLOCK_SIZE, episodes - start), block_rng(seed, b), record=False)[0]
        for b, start in enumerate(range(0, episodes, BLOCK_SIZE))
    ])
    if np.all(returns == returns[0]):
        return float(returns[0]), 0.0
    stderr = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return float(returns.mean()), stderr


class BanditDataset:
    """Logged contextual-bandit rounds: contexts, actions, propensities, rewards."""

    def __init__(self, contexts, actions, propensities, rewards, num_actions: int):
        self.contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
        self.actions = np.asarray(actions, dtype=np.int64)
        self.propensities = np.asarray(propensities, dtype=float)
        self.rewards = np.asarray(rewards, dtype=float)
        self.num_actions = int(num_actions)
        n = len(self.actions)
        if n < 1:
            raise ValueError("a dataset needs at least one round")
        if self.contexts.shape[0] != n or self.propensities.shape != (n,) or self.rewards.shape != (n,):
            raise ValueError("contexts, actions, propensities and rewards must have matching length")
        if np.any((self.propensities < 0) | (self.propensities > 1)):
            raise ValueError("propensities must lie in [0, 1]")
        if self.actions.min() < 0 or self.actions.max() >= self.num_actions:
            raise ValueError(f"actions out of range [0, {self.num_actions})")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def n(self) -> int:
        return len(self.actions)

    def __repr__(self):
        return f"BanditDataset(n={self.n}, dim={self.contexts.shape[1]}, actions={self.num_actions})"

    def subset(self, indices) -> "BanditDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return BanditDataset(self.contexts[idx], self.actions[idx], self.propensities[idx],
                             self.rewards[idx], self.num_actions)


# -- JSON file format ---------------------------------------------------------

_REQUIRED = ("num_states", "num_actions", "horizon", "discount", "transition", "reward",
             "initial", "observation_map")


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return 1


def mdp_from_dict(d: dict) -> TabularMdp:
    missing = [k for k in _REQUIRED if k not in d]
    if missing:
        raise ConfigError(f"missing field(s): {', '.join(missing)}")
    mdp = TabularMdp(
        transition=d["transition"], reward=d["reward"], initial=d["initial"],
        horizon=d["horizon"], discount=d["discount"],
        observation_map=np.asarray(d["observation_map"], dtype=np.int64),
        reward_flip_prob=d.get("reward_flip_prob", 0.0),
    )
    if mdp.num_states != d["num_states"] or mdp.num_actions != d["num_actions"]:
        raise ValueError(
            f"num_states/num_actions ({d['num_states']}, {d['num_actions']}) disagree with "
            f"transition shape {mdp.transition.shape}"
        )
    return mdp


def load_mdp(path: str | Path) -> TabularMdp:
    """Read a tabular MDP from JSON, validating every invariant.

    Raises :class:`ConfigError` with the file name and offending line.
    """
    path = Path(path)
    text = path.read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
    try:
        return mdp_from_dict(d)
    except (ValueError, TypeError) as e:
        msg = str(e)
        key = next((k for k in _REQUIRED if msg.startswith(k)), None)
        line = _line_of(text, key) if key else 1
        raise ConfigError(f"{path}:{line}: {msg}") from e


def save_mdp(mdp: TabularMdp, path: str | Path) -> None:
    path = Path(path)
    d = mdp.to_dict()
    lines = ["{"]
    items = list(d.items())
    for i, (k, v) in enumerate(items):
        sep = "," if i < len(items) - 1 else ""
        lines.append(f"  {json.dumps(k)}: {json.dumps(v)}{sep}")
    lines.append("}")
    path.write_text("\n".join(lines) + "\n")
