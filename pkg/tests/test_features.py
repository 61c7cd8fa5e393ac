import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prefrl.environment import make_rng
from prefrl.features import (
    CoverageError,
    FeatureMap,
    feature_bound,
    policy_features,
    policy_features_in_model,
    trajectory_features,
)
from prefrl.mdp import Mdp, Policy, enumerate_trajectories

from conftest import mc_rollouts, random_decomposed, random_markov, within_3_sigma


def _tabular_from(fmap, mdp, policies):
    """Tabular copy of a decomposed map over every trajectory the policies reach."""
    table = {}
    for pol in policies:
        for traj, _ in enumerate_trajectories(mdp, pol):
            table[traj] = trajectory_features(fmap, traj)
    return FeatureMap(table=table)


def test_constant_step_feature_sums():
    phi = np.zeros((2, 2, 3))
    phi[..., 0] = 1.0
    fmap = FeatureMap(per_step=phi)
    assert np.array_equal(trajectory_features(fmap, ((0, 1), (1, 0))), [2.0, 0.0, 0.0])


def test_horizon_one_is_single_step():
    fmap = random_decomposed(np.random.default_rng(0), 2, 2, 3)
    assert np.array_equal(trajectory_features(fmap, ((1, 0),)), fmap.per_step[1, 0])


def test_decomposed_matches_naive_loop():
    rng = np.random.default_rng(1)
    fmap = random_decomposed(rng, 3, 2, 4)
    for _ in range(20):
        traj = tuple((int(rng.integers(3)), int(rng.integers(2))) for _ in range(3))
        naive = np.zeros(4)
        for s, a in traj:
            for k in range(4):
                naive[k] += fmap.per_step[s, a, k]
        assert np.allclose(trajectory_features(fmap, traj), naive, rtol=0, atol=1e-12)


def test_tabular_miss_is_coverage_error():
    fmap = FeatureMap(table={((0, 0),): [1.0, 2.0]})
    with pytest.raises(CoverageError):
        trajectory_features(fmap, ((1, 0),))


def test_bad_tables_rejected():
    with pytest.raises(ValueError):
        FeatureMap(table={((0, 0),): [1.0], ((1, 0),): [1.0, 2.0]})
    with pytest.raises(ValueError):
        FeatureMap(per_step=np.full((1, 1, 2), np.nan))
    with pytest.raises(ValueError):
        FeatureMap()


def test_policy_features_horizon_one():
    rng = np.random.default_rng(2)
    fmap = random_decomposed(rng, 3, 2, 2)
    rho = np.array([0.2, 0.5, 0.3])
    mdp = Mdp(rho, rng.dirichlet(np.ones(3), size=(3, 2)), 1)
    pol = Policy.markov([[1, 0, 1]])
    expected = sum(rho[s] * fmap.per_step[s, pol.actions[0, s]] for s in range(3))
    assert np.allclose(policy_features(fmap, mdp, pol), expected, atol=1e-12)


def test_policy_features_chain(chain):
    fmap = random_decomposed(np.random.default_rng(3), 2, 2, 3)
    pol = Policy.markov([[0, 0], [1, 1], [0, 1]])
    traj = ((0, 0), (1, 1), (1, 1))
    assert np.allclose(policy_features(fmap, chain, pol), trajectory_features(fmap, traj), atol=1e-12)


def test_policy_features_monte_carlo(small_instance):
    inst = small_instance
    rng = make_rng(4)
    for pol in list(inst.policies)[:3]:
        states, acts = mc_rollouts(inst.mdp.initial_dist, inst.mdp.transitions, pol.actions,
                                   100_000, rng)
        samples = inst.fmap.per_step[states, acts].sum(axis=1)
        assert within_3_sigma(samples, policy_features(inst.fmap, inst.mdp, pol))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decomposed_and_enumeration_paths_agree(seed):
    rng = np.random.default_rng(seed)
    mdp = Mdp(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3), size=(3, 2)), 3)
    fmap = random_decomposed(rng, 3, 2, 3)
    pols = [random_markov(rng, 3, 3, 2) for _ in range(2)]
    tab = _tabular_from(fmap, mdp, pols)
    for pol in pols:
        assert np.allclose(policy_features(fmap, mdp, pol), policy_features(tab, mdp, pol), atol=1e-9)


def test_in_model_with_true_model(small_instance):
    m = small_instance.mdp
    for pol in small_instance.policies:
        a = policy_features_in_model(small_instance.fmap, m.transitions, m.initial_dist, pol, m.horizon)
        assert np.array_equal(a, policy_features(small_instance.fmap, m, pol))


def test_in_model_point_mass_rows():
    rng = np.random.default_rng(5)
    fmap = random_decomposed(rng, 3, 2, 2)
    P = np.zeros((3, 2, 3))
    P[:, 0, 2] = 1.0
    P[:, 1, 1] = 1.0
    pol = Policy.markov([[0, 0, 0], [1, 1, 1], [0, 0, 0]])
    got = policy_features_in_model(fmap, P, np.array([1.0, 0, 0]), pol, 3)
    assert np.allclose(got, trajectory_features(fmap, ((0, 0), (2, 1), (1, 0))), atol=1e-12)


def test_in_model_empirical_monte_carlo(small_instance):
    rng = make_rng(6)
    inst = small_instance
    # a sparse frequency model, as the learner would build from few visits
    counts = rng.integers(0, 5, size=(3, 2, 3)) + 1
    P_hat = counts / counts.sum(axis=2, keepdims=True)
    pol = inst.policies[1]
    states, acts = mc_rollouts(inst.mdp.initial_dist, P_hat, pol.actions, 100_000, rng)
    samples = inst.fmap.per_step[states, acts].sum(axis=1)
    exact = policy_features_in_model(inst.fmap, P_hat, inst.mdp.initial_dist, pol, 3)
    assert within_3_sigma(samples, exact)


def test_feature_bound_decomposed():
    phi = np.zeros((2, 2, 2))
    phi[0, 0] = [0.6, 0.8]
    phi[1, 1] = [0.5, 0.0]
    assert feature_bound(FeatureMap(per_step=phi), horizon=4) == pytest.approx(4.0)


def test_feature_bound_tabular():
    fmap = FeatureMap(table={((0, 0),): [1.0, 0.0], ((1, 0),): [0.0, 2.0], ((0, 1),): [0.3, 0.4]})
    assert feature_bound(fmap) == 2.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decomposed_bound_dominates_enumeration(seed):
    rng = np.random.default_rng(seed)
    mdp = Mdp(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2), size=(2, 2)), 3)
    fmap = random_decomposed(rng, 2, 2, 3)
    B = feature_bound(fmap, mdp)
    pol = random_markov(rng, 3, 2, 2)
    for traj, _ in enumerate_trajectories(mdp, pol):
        assert np.linalg.norm(trajectory_features(fmap, traj)) <= B + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_mixture_embedding_is_convex_combination(seed, theta):
    rng = np.random.default_rng(seed)
    mdp = Mdp(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2), size=(2, 2)), 2)
    fmap = random_decomposed(rng, 2, 2, 2)
    p1, p2 = random_markov(rng, 2, 2, 2), random_markov(rng, 2, 2, 2)
    mixed = np.zeros(2)
    for weight, pol in ((theta, p1), (1 - theta, p2)):
        for traj, prob in enumerate_trajectories(mdp, pol):
            mixed += weight * prob * trajectory_features(fmap, traj)
    expected = theta * policy_features(fmap, mdp, p1) + (1 - theta) * policy_features(fmap, mdp, p2)
    assert np.allclose(mixed, expected, atol=1e-9)
