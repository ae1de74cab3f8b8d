"""Base off-policy estimators.

Every estimator is a pure function ``(policy, dataset, seed) -> float``.
Sequential estimators work on the padded arrays of :class:`~opera.core.Dataset`;
the importance-sampling estimators also accept a
:class:`~opera.core.BanditDataset`, in which case ``policy`` must expose
``action_probs(contexts) -> (n, A)``.

The registry maps string ids to :class:`OpeEstimator` objects so that
experiment files can name estimators::

    >>> est = make_estimator("fqe", folds=2)
    >>> est.id, est.metadata["folds"]
    ('fqe', 2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .core import BanditDataset, Dataset, TabularMdp, TabularPolicy, true_value_dp
from .exceptions import ConfigError, DegenerateWeightsError, InsufficientDataError, SupportViolationError


# -- importance weights -------------------------------------------------------

def _check_support(p: np.ndarray, mask: np.ndarray | None = None) -> None:
    bad = p <= 0 if mask is None else (p <= 0) & mask
    if np.any(bad):
        raise SupportViolationError("support violation")


def step_ratios(policy: TabularPolicy, dataset: Dataset) -> np.ndarray:
    """Per-step ratios ``pi_e(a_t|o_t) / p_b,t``, shape ``(n, H)``; padding is 1."""
    _check_support(dataset.behavior_probs, dataset.mask)
    target = policy.probs[dataset.observations, dataset.actions]
    ratio = target / np.where(dataset.mask, dataset.behavior_probs, 1.0)
    return np.where(dataset.mask, ratio, 1.0)


def trajectory_weights(policy: TabularPolicy, dataset: Dataset) -> np.ndarray:
    return np.prod(step_ratios(policy, dataset), axis=1)


def _bandit_weights(policy, dataset: BanditDataset) -> np.ndarray:
    _check_support(dataset.propensities)
    probs = policy.action_probs(dataset.contexts)
    return probs[np.arange(dataset.n), dataset.actions] / dataset.propensities


def is_estimate(policy, dataset, seed: int | None = None) -> float:
    """Trajectory-wise importance sampling: mean of ``w(tau) * G(tau)``."""
    if isinstance(dataset, BanditDataset):
        return float(np.mean(_bandit_weights(policy, dataset) * dataset.rewards))
    return float(np.mean(trajectory_weights(policy, dataset) * dataset.returns()))


def wis_estimate(policy, dataset, seed: int | None = None) -> float:
    """Self-normalized importance sampling.

    Raises
    ------
    DegenerateWeightsError
        If every importance weight is zero.
    """
    if isinstance(dataset, BanditDataset):
        w, g = _bandit_weights(policy, dataset), dataset.rewards
    else:
        w, g = trajectory_weights(policy, dataset), dataset.returns()
    total = w.sum()
    if not total > 0:
        raise DegenerateWeightsError("degenerate weights")
    return float(w @ g / total)


# -- fitted Q evaluation --------------------------------------------------------

def _valid_transitions(dataset: Dataset):
    m = dataset.mask
    return dataset.observations[m], dataset.actions[m], dataset.rewards[m], dataset.next_observations[m]


def fqe_q_values(policy: TabularPolicy, dataset: Dataset, iterations: int | None = None) -> np.ndarray:
    """Tabular fitted Q iterates on all logged transitions.

    Returns ``Q`` of shape ``(iterations + 1, O, A)`` with ``Q[h]`` the
    ``h``-steps-to-go estimate and ``Q[0] = 0``. Each iterate is the sample
    mean of ``r + gamma * V_{h-1}(o')`` per observation-action pair; pairs
    never seen in the data stay at 0. Terminal observations never appear as
    a logged source, so bootstrapping through them adds nothing.
    """
    iters = dataset.horizon if iterations is None else int(iterations)
    if iters < 1:
        raise ValueError("iterations must be >= 1")
    O, A = dataset.num_observations, dataset.num_actions
    obs, act, rew, nxt = _valid_transitions(dataset)
    flat = obs * A + act
    counts = np.bincount(flat, minlength=O * A).astype(float)
    reward_sum = np.bincount(flat, weights=rew, minlength=O * A)
    seen = counts > 0
    safe = np.where(seen, counts, 1.0)
    pi = policy.probs
    Q = np.zeros((iters + 1, O, A))
    for h in range(1, iters + 1):
        v_prev = np.einsum("oa,oa->o", pi, Q[h - 1])
        backup = reward_sum + dataset.discount * np.bincount(flat, weights=v_prev[nxt], minlength=O * A)
        Q[h] = np.where(seen, backup / safe, 0.0).reshape(O, A)
    return Q


def cv_folds(n: int, folds: int, seed: int | None = None, shuffle: bool = False) -> list[np.ndarray]:
    """Contiguous trajectory folds, optionally after a seeded permutation."""
    if folds < 1:
        raise ValueError("folds must be >= 1")
    if n < folds:
        raise InsufficientDataError("insufficient data for folds")
    order = np.arange(n)
    if shuffle:
        order = np.random.default_rng(np.random.SeedSequence([0 if seed is None else int(seed), n])).permutation(n)
    return np.array_split(order, folds)


def _cross_fit(dataset: Dataset, folds: int, seed, shuffle: bool):
    """Yield ``(train, held_out)`` dataset pairs; one fold trains and tests on everything."""
    if folds == 1:
        if dataset.n < 1:
            raise InsufficientDataError("insufficient data for folds")
        yield dataset, dataset
        return
    parts = cv_folds(dataset.n, folds, seed, shuffle)
    for k, test_idx in enumerate(parts):
        train_idx = np.concatenate([p for j, p in enumerate(parts) if j != k])
        yield dataset.subset(train_idx), dataset.subset(test_idx)


def _initial_value(policy: TabularPolicy, q_h: np.ndarray, dataset: Dataset) -> float:
    o0 = dataset.observations[:, 0]
    return float(np.mean(np.einsum("na,na->n", policy.probs[o0], q_h[o0])))


def fqe_estimate(policy: TabularPolicy, dataset: Dataset, seed: int | None = None, *,
                 folds: int = 2, iterations: int | None = None, shuffle: bool = False) -> float:
    """Cross-fitted tabular FQE.

    Each fold's Q-function is fit on the other folds and evaluates the
    held-out fold's initial observations; fold estimates are averaged.
    """
    estimates = []
    for train, test in _cross_fit(dataset, folds, seed, shuffle):
        Q = fqe_q_values(policy, train, iterations)
        estimates.append(_initial_value(policy, Q[-1], test))
    return float(np.mean(estimates))


# -- model based ----------------------------------------------------------------

def fit_tabular_model(dataset: Dataset) -> TabularMdp:
    """Maximum-likelihood MDP over observations.

    Unseen observation-action pairs self-loop with reward 0, and the initial
    distribution is the empirical distribution of first observations.
    """
    O, A = dataset.num_observations, dataset.num_actions
    obs, act, rew, nxt = _valid_transitions(dataset)
    flat = (obs * A + act) * O + nxt
    counts = np.bincount(flat, minlength=O * A * O).reshape(O, A, O).astype(float)
    reward_sum = np.bincount(flat, weights=rew, minlength=O * A * O).reshape(O, A, O)
    totals = counts.sum(axis=2, keepdims=True)
    seen = totals[..., 0] > 0
    P = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 0.0)
    R = np.where(counts > 0, reward_sum / np.where(counts > 0, counts, 1.0), 0.0)
    o_idx, a_idx = np.nonzero(~seen)
    P[o_idx, a_idx, o_idx] = 1.0
    initial = np.bincount(dataset.observations[:, 0], minlength=O) / dataset.n
    return TabularMdp(transition=P, reward=R, initial=initial, horizon=dataset.horizon,
                      discount=dataset.discount)


def mb_estimate(policy: TabularPolicy, dataset: Dataset, seed: int | None = None) -> float:
    """Exact value of ``policy`` in the maximum-likelihood model of the data."""
    return true_value_dp(fit_tabular_model(dataset), policy)


# -- doubly robust ----------------------------------------------------------------

def _dr_terms(policy: TabularPolicy, dataset: Dataset, q: np.ndarray) -> np.ndarray:
    """Per-trajectory per-decision doubly robust values for a time-indexed ``q``."""
    H = dataset.horizon
    rho = np.cumprod(step_ratios(policy, dataset), axis=1)
    rho_prev = np.concatenate([np.ones((dataset.n, 1)), rho[:, :-1]], axis=1)
    to_go = np.minimum(H - np.arange(H), q.shape[0] - 1)
    q_sa = q[to_go[None, :], dataset.observations, dataset.actions]
    v_s = np.einsum("nta,nta->nt", policy.probs[dataset.observations], q[to_go[None, :], dataset.observations])
    g = dataset.discount ** np.arange(H)
    terms = rho * (dataset.rewards - q_sa) + rho_prev * v_s
    return (terms * dataset.mask) @ g


def dr_estimate(policy: TabularPolicy, dataset: Dataset, seed: int | None = None, *,
                q: np.ndarray | None = None, folds: int = 2, iterations: int | None = None,
                shuffle: bool = False) -> float:
    """Per-decision doubly robust estimate.

    Parameters
    ----------
    q : array of shape (K + 1, O, A), optional
        Steps-to-go action values used as control variate. When omitted,
        cross-fitted FQE supplies them: each fold is corrected with the Q fit
        on the other folds.
    """
    if q is not None:
        return float(np.mean(_dr_terms(policy, dataset, np.asarray(q, float))))
    values = []
    for train, test in _cross_fit(dataset, folds, seed, shuffle):
        values.append(_dr_terms(policy, test, fqe_q_values(policy, train, iterations)))
    return float(np.mean(np.concatenate(values)))


# -- contextual bandit direct method ------------------------------------------------

def kernel_reward_predictions(dataset: BanditDataset, contexts: np.ndarray, bandwidth: float) -> np.ndarray:
    """Nadaraya-Watson reward predictions per action, shape ``(len(contexts), A)``.

    A Gaussian kernel of width ``bandwidth`` is applied separately to the
    rounds logged under each action. An infinite bandwidth yields the
    per-action mean reward; actions never logged predict 0.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    X = np.atleast_2d(contexts)
    out = np.zeros((X.shape[0], dataset.num_actions))
    for a in range(dataset.num_actions):
        sel = dataset.actions == a
        if not sel.any():
            continue
        r = dataset.rewards[sel]
        if math.isinf(bandwidth):
            out[:, a] = r.mean()
            continue
        Xa = dataset.contexts[sel]
        d2 = (X * X).sum(1)[:, None] - 2 * X @ Xa.T + (Xa * Xa).sum(1)[None, :]
        d2 = np.maximum(d2, 0.0)
        w = np.exp(-(d2 - d2.min(axis=1, keepdims=True)) / (2 * bandwidth ** 2))
        out[:, a] = w @ r / w.sum(axis=1)
    return out


def dm_kernel_estimate(policy, dataset: BanditDataset, seed: int | None = None, *,
                       bandwidth: float) -> float:
    """Direct method: average predicted reward of ``policy`` over logged contexts."""
    r_hat = kernel_reward_predictions(dataset, dataset.contexts, bandwidth)
    probs = policy.action_probs(dataset.contexts)
    return float(np.mean(np.einsum("na,na->n", probs, r_hat)))


# -- registry -----------------------------------------------------------------------

@dataclass(frozen=True)
class OpeEstimator:
    """A named estimator with its hyperparameters bound."""

    id: str
    estimate: Callable[..., float]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __call__(self, policy, dataset, seed: int | None = None) -> float:
        return self.estimate(policy, dataset, seed, **self.metadata)


_FACTORIES: dict[str, tuple[Callable[..., float], frozenset]] = {
    "is": (is_estimate, frozenset()),
    "wis": (wis_estimate, frozenset()),
    "fqe": (fqe_estimate, frozenset({"folds", "iterations", "shuffle"})),
    "mb": (mb_estimate, frozenset()),
    "dr": (dr_estimate, frozenset({"folds", "iterations", "shuffle"})),
}
DM_PREFIX = "dm-kernel:"


def available_estimators() -> list[str]:
    return [*_FACTORIES, DM_PREFIX + "<bandwidth>"]


def make_estimator(estimator_id: str, **params) -> OpeEstimator:
    """Look up an estimator by id and bind its hyperparameters.

    Raises
    ------
    ConfigError
        For an unknown id, a malformed bandwidth or an unknown parameter.
    """
    if estimator_id.startswith(DM_PREFIX):
        text = estimator_id[len(DM_PREFIX):]
        try:
            bandwidth = float(text)
        except ValueError:
            raise ConfigError(f"bad bandwidth in estimator id {estimator_id!r}") from None
        if not bandwidth > 0:
            raise ConfigError(f"bandwidth must be positive in {estimator_id!r}")
        if params:
            raise ConfigError(f"{estimator_id} takes no parameters, got {sorted(params)}")
        return OpeEstimator(estimator_id, dm_kernel_estimate, {"bandwidth": bandwidth})
    if estimator_id not in _FACTORIES:
        raise ConfigError(f"unknown estimator id {estimator_id!r}; known: {', '.join(available_estimators())}")
    fn, allowed = _FACTORIES[estimator_id]
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"estimator {estimator_id!r} does not accept {sorted(unknown)}")
    return OpeEstimator(estimator_id, fn, dict(params))
