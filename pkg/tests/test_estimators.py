import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opera.bootstrap import BootstrapPlan, collect_reports, mse_hat
from opera.core import BanditDataset, Dataset, TabularPolicy, q_values_dp, rollout, true_value_dp
from opera.envs import make_environment
from opera.estimators import (available_estimators, cv_folds, dm_kernel_estimate, dr_estimate, fqe_estimate,
                              fqe_q_values, is_estimate, make_estimator, mb_estimate, step_ratios,
                              trajectory_weights, wis_estimate)
from opera.exceptions import ConfigError, DegenerateWeightsError, InsufficientDataError, SupportViolationError

from .conftest import chain_mdp, dataset_of, make_traj

ALWAYS_0 = TabularPolicy(np.array([[1.0, 0.0]]))


@pytest.fixture(scope="module")
def graph():
    return make_environment("graph", {"stochastic_transitions": True, "stochastic_rewards": True})


@pytest.fixture(scope="module")
def graph_data(graph):
    return graph.sample(graph.policy("noised:0.5"), 64, 3)


# -- importance sampling ----------------------------------------------------------

def test_is_hand_product():
    data = dataset_of([make_traj([0.0, 1.0], probs=[0.5, 0.5])])
    assert is_estimate(ALWAYS_0, data) == 4.0


def test_is_on_policy_is_mean_return(graph, graph_data):
    pi_b = graph.policy("noised:0.5")
    assert np.all(trajectory_weights(pi_b, graph_data) == 1.0)
    assert is_estimate(pi_b, graph_data) == pytest.approx(graph_data.returns().mean(), abs=1e-12)
    assert wis_estimate(pi_b, graph_data) == pytest.approx(graph_data.returns().mean(), abs=1e-12)


def test_is_support_violation():
    data = dataset_of([make_traj([1.0], probs=[0.0])])
    with pytest.raises(SupportViolationError, match="support violation"):
        is_estimate(ALWAYS_0, data)
    with pytest.raises(SupportViolationError):
        step_ratios(ALWAYS_0, data)


def test_wis_hand_average():
    pi = TabularPolicy(np.array([[0.75, 0.25]]))
    data = dataset_of([make_traj([0.0], probs=[0.75]), make_traj([1.0], probs=[0.25])])
    assert np.allclose(trajectory_weights(pi, data), [1.0, 3.0])
    assert wis_estimate(pi, data) == 0.75


def test_wis_single_trajectory_is_its_return():
    data = dataset_of([make_traj([0.3, 0.2], probs=[0.1, 0.9])])
    assert wis_estimate(ALWAYS_0, data) == pytest.approx(0.5)


def test_wis_degenerate_weights():
    data = dataset_of([make_traj([1.0], actions=[1], probs=[0.5])])
    with pytest.raises(DegenerateWeightsError, match="degenerate weights"):
        wis_estimate(ALWAYS_0, data)


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.05, 1.0), st.integers(0, 1)), min_size=1, max_size=12))
def test_wis_bounded_by_returns(rows):
    pi = TabularPolicy(np.array([[0.6, 0.4]]))
    data = dataset_of([make_traj([r], probs=[p], actions=[a]) for r, p, a in rows])
    g = data.returns()
    est = wis_estimate(pi, data)
    assert g.min() - 1e-9 <= est <= g.max() + 1e-9


def test_is_unbiased_on_graph():
    env = make_environment("graph")
    pi_b, pi_e = env.policy("noised:0.5"), env.policy("noised:0.2")
    est = np.array([is_estimate(pi_e, env.sample(pi_b, 16, s)) for s in range(1000)])
    truth = env.truth(pi_e)[0]
    assert abs(est.mean() - truth) <= 4 * est.std(ddof=1) / np.sqrt(len(est))


# -- FQE ------------------------------------------------------------------------

@pytest.mark.parametrize("folds", [1, 2, 3])
def test_fqe_exact_on_deterministic_chain(folds):
    mdp = chain_mdp(discount=0.5)
    data = rollout(mdp, TabularPolicy.uniform(2, 2), 60, 0)
    pi = TabularPolicy(np.array([[0.3, 0.7], [0.9, 0.1]]))
    assert fqe_estimate(pi, data, folds=folds) == pytest.approx(true_value_dp(mdp, pi), abs=1e-9)
    assert true_value_dp(mdp, pi) == 0.5


def test_fqe_exact_on_deterministic_graph_with_full_coverage():
    env = make_environment("graph")
    data = env.sample(env.policy("uniform"), 400, 1)
    for spec in ("optimal", "noised:0.3", "action:1"):
        pi = env.policy(spec)
        assert abs(fqe_estimate(pi, data, folds=2) - env.truth(pi)[0]) <= 1e-9


def test_fqe_zero_rewards():
    data = dataset_of([make_traj([0.0, 0.0], probs=[0.5, 0.5]) for _ in range(4)])
    assert fqe_estimate(ALWAYS_0, data) == 0.0


def test_fqe_duplicated_halves_match_single_fold(graph, graph_data):
    pi = graph.policy("noised:0.1")
    doubled = Dataset.concatenate([graph_data, graph_data])
    assert fqe_estimate(pi, doubled, folds=2) == pytest.approx(fqe_estimate(pi, graph_data, folds=1), abs=1e-12)


def test_fqe_insufficient_data_for_folds():
    data = dataset_of([make_traj([1.0])])
    with pytest.raises(InsufficientDataError, match="insufficient data for folds"):
        fqe_estimate(ALWAYS_0, data, folds=2)
    assert fqe_estimate(ALWAYS_0, data, folds=1) == 1.0


def test_fqe_unseen_pairs_are_zero():
    data = dataset_of([make_traj([1.0], actions=[1])])
    Q = fqe_q_values(ALWAYS_0, data)
    assert Q[1, 0, 0] == 0.0 and Q[1, 0, 1] == 1.0


def test_cv_folds_partition():
    parts = cv_folds(10, 3)
    assert [p.tolist() for p in parts] == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]
    shuffled = cv_folds(10, 3, seed=4, shuffle=True)
    assert sorted(np.concatenate(shuffled).tolist()) == list(range(10))
    assert [p.tolist() for p in shuffled] == [p.tolist() for p in cv_folds(10, 3, seed=4, shuffle=True)]


# -- model based ---------------------------------------------------------------------

def test_mb_recovers_deterministic_mdp():
    env = make_environment("graph")
    data = env.sample(env.policy("uniform"), 400, 2)
    for spec in ("optimal", "noised:0.3"):
        pi = env.policy(spec)
        assert mb_estimate(pi, data) == pytest.approx(env.truth(pi)[0], abs=1e-12)


def test_mb_empty_coverage_is_zero():
    data = dataset_of([make_traj([1.0, 1.0], actions=[1, 1]) for _ in range(3)])
    assert mb_estimate(ALWAYS_0, data) == 0.0


def test_mb_graph_within_bootstrap_error(graph):
    pi_b, pi_e = graph.policy("noised:0.5"), graph.policy("noised:0.1")
    data = graph.sample(pi_b, 512, 7)
    plan = BootstrapPlan(n_bootstrap=200, eta=1.0, seed=1)
    report = collect_reports([make_estimator("mb")], pi_e, data, plan)[0]
    se = np.sqrt(mse_hat(report, plan, data.n))
    assert abs(report.point - graph.truth(pi_e)[0]) <= 3 * se


# -- doubly robust --------------------------------------------------------------------

def _pdis(policy, data):
    rho = np.cumprod(step_ratios(policy, data), axis=1)
    g = data.discount ** np.arange(data.horizon)
    return float(np.mean((rho * data.rewards * data.mask) @ g))


def test_dr_zero_q_is_per_decision_is(graph, graph_data):
    pi = graph.policy("noised:0.1")
    q = np.zeros((graph_data.horizon + 1, graph_data.num_observations, 2))
    assert dr_estimate(pi, graph_data, q=q) == pytest.approx(_pdis(pi, graph_data), abs=1e-12)


def test_dr_zero_rewards_zero_q():
    data = dataset_of([make_traj([0.0, 0.0], probs=[0.5, 0.5]) for _ in range(4)])
    assert dr_estimate(ALWAYS_0, data, q=np.zeros((3, 1, 2))) == 0.0
    assert dr_estimate(ALWAYS_0, data) == 0.0


def test_dr_exact_q_on_policy_unbiased(graph):
    pi = graph.policy("noised:0.4")
    q = q_values_dp(graph.mdp, pi)
    est = np.array([dr_estimate(pi, graph.sample(pi, 10, s), q=q) for s in range(1000)])
    truth = graph.truth(pi)[0]
    assert abs(est.mean() - truth) <= 3 * est.std(ddof=1) / np.sqrt(len(est))


def test_dr_exact_q_deterministic_mdp_is_exact():
    env = make_environment("graph")
    pi_e = env.policy("noised:0.2")
    data = env.sample(env.policy("noised:0.6"), 50, 0)
    q = q_values_dp(env.mdp, pi_e)
    assert dr_estimate(pi_e, data, q=q) == pytest.approx(env.truth(pi_e)[0], abs=1e-9)


# -- shared properties ----------------------------------------------------------------

@pytest.mark.parametrize("eid", ["is", "wis", "mb", "fqe", "dr"])
@given(seed=st.integers(0, 2**32 - 1))
def test_estimators_order_invariant(graph, graph_data, eid, seed):
    pi = graph.policy("noised:0.1")
    perm = np.random.default_rng(seed).permutation(graph_data.n)
    est = make_estimator(eid, folds=1) if eid in ("fqe", "dr") else make_estimator(eid)
    a, b = est(pi, graph_data, 0), est(pi, graph_data.subset(perm), 0)
    assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("eid", ["is", "wis", "mb", "fqe", "dr"])
def test_estimators_deterministic_and_finite(graph, graph_data, eid):
    pi = graph.policy("noised:0.1")
    est = make_estimator(eid)
    a = est(pi, graph_data, 5)
    assert np.isfinite(a) and a == est(pi, graph_data, 5)


# -- kernel direct method --------------------------------------------------------------

def test_dm_kernel_infinite_bandwidth_is_action_means():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 2))
    a = np.arange(30) % 3
    r = rng.normal(size=30)
    data = BanditDataset(x, a, np.full(30, 1 / 3), r, 3)

    class Uniform:
        def action_probs(self, contexts):
            return np.full((len(contexts), 3), 1 / 3)

    means = [r[a == k].mean() for k in range(3)]
    assert dm_kernel_estimate(Uniform(), data, bandwidth=np.inf) == pytest.approx(np.mean(means), abs=1e-12)
    assert make_estimator("dm-kernel:inf")(Uniform(), data) == pytest.approx(np.mean(means), abs=1e-12)


def test_dm_kernel_unlogged_action_predicts_zero():
    data = BanditDataset(np.zeros((2, 1)), [0, 0], [0.5, 0.5], [1.0, 3.0], 2)

    class Always1:
        def action_probs(self, contexts):
            return np.tile([0.0, 1.0], (len(contexts), 1))

    assert dm_kernel_estimate(Always1(), data, bandwidth=1.0) == 0.0


# -- registry ------------------------------------------------------------------------

def test_registry():
    assert {"is", "wis", "fqe", "mb", "dr"} <= set(available_estimators())
    est = make_estimator("fqe", folds=3, iterations=2)
    assert est.id == "fqe" and est.metadata == {"folds": 3, "iterations": 2}
    assert make_estimator("dm-kernel:0.5").metadata == {"bandwidth": 0.5}
    for bad in ("nope", "dm-kernel:x", "dm-kernel:-1"):
        with pytest.raises(ConfigError):
            make_estimator(bad)
    with pytest.raises(ConfigError, match="does not accept"):
        make_estimator("is", folds=2)
