import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opera.core import TabularPolicy, rollout, true_value_dp
from opera.envs import (BanditConfig, GraphConfig, SepsisConfig, SepsisSimulator, build_bandit, build_graph,
                        build_sepsis, make_environment, noised_policy)
from opera.envs.sepsis import NUM_ACTIONS
from opera.estimators import is_estimate, make_estimator
from opera.exceptions import ConfigError

GRAPH_CONFIGS = [GraphConfig(stochastic_transitions=st_, stochastic_rewards=st_, partially_observed=po)
                 for st_ in (False, True) for po in (False, True)]


# -- graph --------------------------------------------------------------------

def test_graph_always_odd_path():
    mdp = build_graph(GraphConfig(horizon=4))
    pi = TabularPolicy.deterministic([0] * mdp.num_observations, 2)
    data = rollout(mdp, pi, 1, 0)
    assert data.states[0].tolist() == [0, 1, 3, 5]
    assert data.next_states[0].tolist() == [1, 3, 5, 8]
    # three odd states at +1 each, then the bonus for an odd penultimate state
    assert true_value_dp(mdp, pi) == 4.0
    assert true_value_dp(build_graph(GraphConfig(horizon=4, penultimate_bonus_on_odd=False)), pi) == 3.0


def test_graph_always_even_path():
    mdp = build_graph(GraphConfig(horizon=4))
    pi = TabularPolicy.deterministic([1] * mdp.num_observations, 2)
    assert true_value_dp(mdp, pi) == -3.0


@pytest.mark.parametrize("cfg", GRAPH_CONFIGS)
def test_graph_episodes_last_exactly_horizon(cfg):
    mdp = build_graph(cfg)
    data = rollout(mdp, TabularPolicy.uniform(mdp.num_observations, 2), 500, 1)
    assert np.all(data.lengths == cfg.horizon)
    assert np.all(data.next_states[:, -1] == 2 * cfg.horizon)
    assert mdp.absorbing[2 * cfg.horizon]


def test_graph_deterministic_returns_point_mass():
    mdp = build_graph(GraphConfig())
    g = rollout(mdp, TabularPolicy.deterministic([0] * mdp.num_observations, 2), 200, 3).returns()
    assert np.all(g == g[0])


@pytest.mark.parametrize("horizon", [2, 4, 7])
def test_graph_pomdp_observation_count(horizon):
    mdp = build_graph(GraphConfig(horizon=horizon, partially_observed=True))
    # start, one per inner layer, and the absorbing state
    assert mdp.num_observations == horizon + 1
    assert build_graph(GraphConfig(horizon=horizon)).num_observations == 2 * horizon + 1


def test_graph_slip_probability():
    mdp = build_graph(GraphConfig(stochastic_transitions=True, slip_prob=0.25))
    assert mdp.transition[0, 0, 1] == 0.75
    assert mdp.transition[0, 0, 2] == 0.25


def test_graph_config_validation():
    with pytest.raises(ValueError):
        GraphConfig(horizon=1)
    with pytest.raises(ValueError):
        GraphConfig(slip_prob=1.0)


# -- sepsis -------------------------------------------------------------------

@pytest.fixture(scope="module")
def sim():
    return SepsisSimulator(SepsisConfig())


def test_sepsis_shape(sim):
    mdp = sim.mdp
    assert mdp.num_actions == NUM_ACTIONS == 8
    assert mdp.num_states == 3 * 3 * 2 * 5 * 2 + 2
    pomdp = build_sepsis(SepsisConfig(partially_observed=True))
    assert pomdp.num_observations == 3 * 3 * 2 + 2


def test_sepsis_three_abnormal_dies(sim):
    s = sim.encode((0, 0, 0, 2), False)
    assert sim.num_abnormal((0, 0, 0, 2)) == 3
    for a in range(8):
        assert sim.mdp.transition[s, a, sim.death] == 1.0
        assert sim.mdp.reward[s, a, sim.death] == -1.0


def test_sepsis_all_normal_no_treatment_discharges(sim):
    s = sim.encode((1, 1, 1, 2), True)
    assert sim.mdp.transition[s, 0, sim.discharge] == 1.0
    assert sim.mdp.reward[s, 0, sim.discharge] == 1.0
    assert sim.mdp.transition[s, 1, sim.discharge] == 0.0


def test_sepsis_terminals_absorbing_and_rewards(sim):
    mdp = sim.mdp
    assert mdp.absorbing[sim.death] and mdp.absorbing[sim.discharge]
    assert set(np.unique(mdp.reward)) <= {-1.0, 0.0, 1.0}
    nonterminal = np.ones(mdp.num_states, bool)
    nonterminal[[sim.death, sim.discharge]] = False
    # rewards only on entering a terminal state
    assert np.all(mdp.reward[:, :, nonterminal] == 0.0)


def test_sepsis_rollout_rewards_only_at_termination(sim):
    data = rollout(sim.mdp, TabularPolicy.uniform(sim.mdp.num_observations, 8), 2000, 0)
    last = data.lengths - 1
    rows = np.arange(data.n)
    inner = data.rewards.copy()
    inner[rows, last] = 0.0
    assert np.all(inner == 0.0)
    final = data.rewards[rows, last]
    ended = np.isin(data.next_states[rows, last], [sim.death, sim.discharge])
    assert np.all(final[~ended] == 0.0)
    assert np.all(np.abs(final[ended]) == 1.0)


def test_sepsis_diabetes_fraction(sim):
    n = 10**5
    data = rollout(sim.mdp, TabularPolicy.uniform(sim.mdp.num_observations, 8), n, 4)
    diabetic = np.array([sim.decode(s)[1] for s in data.states[:, 0]])
    p = diabetic.mean()
    assert abs(p - 0.2) <= 3 * math.sqrt(0.2 * 0.8 / n)


def test_sepsis_pomdp_hides_glucose_and_diabetes():
    sim = SepsisSimulator(SepsisConfig(partially_observed=True))
    omap = sim.mdp.observation_map
    assert omap[sim.encode((0, 1, 1, 0), False)] == omap[sim.encode((0, 1, 1, 4), True)]
    assert omap[sim.encode((0, 1, 1, 0), False)] != omap[sim.encode((1, 1, 1, 0), False)]


def test_sepsis_optimal_beats_noised(sim):
    mdp = sim.mdp
    pi = sim.optimal_policy()
    values = [true_value_dp(mdp, noised_policy(pi, e)) for e in (0.0, 0.2, 0.5, 1.0)]
    assert values == sorted(values, reverse=True)


def test_sepsis_dynamics_overridable():
    base = make_environment("sepsis")
    harsh = make_environment("sepsis", {"transition_params": {"p_antibiotics": 0.1}})
    pi = base.policy("uniform")
    assert harsh.truth(pi)[0] < base.truth(pi)[0]
    with pytest.raises(ConfigError, match="unknown"):
        make_environment("sepsis", {"transition_params": {"no_such_param": 1}})


# -- bandit -------------------------------------------------------------------

@pytest.fixture(scope="module")
def bandit():
    return build_bandit(BanditConfig())


def test_bandit_suite(bandit):
    ids = [e.id for e in bandit.estimators]
    assert ids[-1] == "is"
    assert ids[:-1] == [f"dm-kernel:{0.25 * 2 ** k:g}" for k in range(8)]


def test_bandit_propensities_match_behavior(bandit):
    data = bandit.problem.sample(1000, 0)
    probs = bandit.problem.behavior.action_probs(data.contexts)
    assert np.array_equal(data.propensities, probs[np.arange(data.n), data.actions])
    assert np.all(data.propensities > 0)
    assert data.contexts.shape == (1000, 10)


def test_bandit_is_on_policy_is_mean_reward(bandit):
    data = bandit.problem.sample(500, 1)
    assert is_estimate(bandit.problem.behavior, data) == pytest.approx(data.rewards.mean(), abs=1e-12)


def test_bandit_wide_kernel_is_global_mean(bandit):
    data = bandit.problem.sample(400, 2)
    pi = bandit.problem.softmax_policy(2.0)
    probs = pi.action_probs(data.contexts)
    means = np.array([data.rewards[data.actions == a].mean() for a in range(5)])
    expected = float(np.mean(probs @ means))
    assert make_estimator("dm-kernel:1e12")(pi, data) == pytest.approx(expected, rel=1e-9)


@pytest.mark.slow
def test_bandit_narrow_kernel_dense_noiseless_data_near_truth():
    problem = build_bandit(BanditConfig(feature_dim=1, noise_std=0.0)).problem
    pi = problem.softmax_policy(3.0)
    truth, truth_se = problem.true_value(pi, 10**5, 0)
    data = problem.sample(20_000, 3)
    estimate = make_estimator("dm-kernel:0.02")(pi, data)
    assert abs(estimate - truth) < 0.01 + 3 * truth_se


def test_bandit_greedy_policy(bandit):
    x = np.random.default_rng(0).normal(size=(50, 10))
    probs = bandit.problem.softmax_policy(math.inf).action_probs(x)
    assert np.array_equal(probs.argmax(axis=1), bandit.problem.mean_rewards(x).argmax(axis=1))
    assert np.all(probs.sum(axis=1) == 1.0)


def test_bandit_config_validation():
    with pytest.raises(ValueError, match="ascending"):
        BanditConfig(bandwidths=(1.0, 0.5))
    with pytest.raises(ValueError, match="positive"):
        BanditConfig(bandwidths=(0.0, 1.0))


# -- policies and registry ----------------------------------------------------

def test_noised_policy_examples():
    pi = TabularPolicy.deterministic([3, 0], 8)
    assert np.array_equal(noised_policy(pi, 0.0).probs, pi.probs)
    assert np.allclose(noised_policy(pi, 1.0).probs, 1 / 8)
    assert noised_policy(pi, 0.05).probs[0, 3] == pytest.approx(0.95 + 0.05 / 8, abs=1e-15)


@given(st.integers(1, 6), st.integers(2, 8), st.floats(0, 1), st.integers(0, 10**6))
def test_noised_policy_rows_sum_to_one(O, A, eps, seed):
    probs = np.random.default_rng(seed).dirichlet(np.ones(A), size=O)
    out = noised_policy(TabularPolicy(probs), eps).probs
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out >= eps / A - 1e-15)


def test_make_environment_policy_specs():
    env = make_environment("graph", {"horizon": 3})
    assert env.default_v_max == 4
    assert np.array_equal(env.policy("action:1").probs[:, 1], np.ones(env.mdp.num_observations))
    assert np.allclose(env.policy("uniform").probs, 0.5)
    for bad in ("noised:2", "softmax:1", "action:5", "noised:x", "bogus"):
        with pytest.raises(ConfigError):
            env.policy(bad)
    with pytest.raises(ConfigError, match="unknown graph config keys"):
        make_environment("graph", {"horizont": 3})
    with pytest.raises(ConfigError, match="unknown environment id"):
        make_environment("gridworld")


def test_export_round_trip(tmp_path):
    from opera.core import load_mdp
    env = make_environment("graph", {"partially_observed": True})
    env.export(tmp_path / "g.json")
    back = load_mdp(tmp_path / "g.json")
    pi = env.policy("noised:0.3")
    assert true_value_dp(back, pi) == env.truth(pi)[0]
    with pytest.raises(ConfigError):
        make_environment("bandit").export(tmp_path / "b.json")
