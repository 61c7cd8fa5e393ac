import numpy as np
import pytest

from prefrl.environment import make_rng
from prefrl.features import FeatureMap
from prefrl.instances import random_instance
from prefrl.mdp import Mdp, Policy


def mc_rollouts(rho, P, actions, n, rng):
    """Vectorized Markov-policy sampler, independent of ``sample_trajectory``.

    Returns ``(states, acts)`` arrays of shape ``(n, H)``.
    """
    P = np.asarray(P)
    H = actions.shape[0]
    S = P.shape[0]
    states = np.empty((n, H), dtype=np.int64)
    acts = np.empty((n, H), dtype=np.int64)
    s = rng.choice(S, size=n, p=rho)
    for h in range(H):
        a = actions[h, s]
        states[:, h], acts[:, h] = s, a
        if h + 1 < H:
            cdf = np.cumsum(P[s, a], axis=1)
            u = rng.random(n)[:, None]
            s = np.minimum((u >= cdf).sum(axis=1), S - 1)
    return states, acts


def within_3_sigma(samples, expected):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(n)
    return np.all(np.abs(mean - expected) <= 3 * se + 1e-12)


@pytest.fixture
def chain():
    """Deterministic 2-state chain 0 -> 1 -> 1 with a 3-step horizon."""
    P = np.zeros((2, 2, 2))
    P[:, :, 1] = 1.0
    return Mdp([1.0, 0.0], P, 3)


@pytest.fixture
def small_instance():
    return random_instance(make_rng(11), num_states=3, num_actions=2, horizon=3, dim=4,
                           num_policies=8)


@pytest.fixture
def coin_mdp():
    """Two states, transitions are fair coin flips regardless of the action."""
    P = np.full((2, 2, 2), 0.5)
    return Mdp([0.5, 0.5], P, 2)


def random_markov(rng, H, S, A):
    return Policy.markov(rng.integers(A, size=(H, S)))


def random_decomposed(rng, S, A, d):
    return FeatureMap(per_step=rng.normal(size=(S, A, d)))
