"""Problem instances and a seeded random-instance generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMap, feature_bound, policy_feature_matrix
from .mdp import Mdp, Policy, PolicyClass
from .oracle import PreferenceModel


@dataclass(frozen=True, eq=False)
class Instance:
    mdp: Mdp
    fmap: FeatureMap
    policies: PolicyClass
    model: PreferenceModel

    @property
    def B(self) -> float:
        return feature_bound(self.fmap, self.mdp)

    def policy_features(self) -> np.ndarray:
        m = self.mdp
        return policy_feature_matrix(self.fmap, m.transitions, m.initial_dist, self.policies, m.horizon)

    def policy_scores(self) -> np.ndarray:
        return self.policy_features() @ self.model.w_star


def random_policies(rng: np.random.Generator, num: int, horizon: int, num_states: int,
                    num_actions: int) -> PolicyClass:
    """``num`` distinct deterministic Markov policies."""
    total = num_actions ** (horizon * num_states)
    if num > total:
        raise ValueError(f"only {total} distinct Markov policies exist")
    seen, out = set(), []
    while len(out) < num:
        table = rng.integers(num_actions, size=(horizon, num_states))
        key = table.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(Policy.markov(table))
    return PolicyClass(out)


def random_instance(rng: np.random.Generator, num_states: int = 3, num_actions: int = 2,
                    horizon: int = 3, dim: int = 4, num_policies: int = 8,
                    param_bound: float = 1.0, w_norm: float | None = None,
                    step_norm: float = 1.0 / 3.0, dirichlet: float = 1.0) -> Instance:
    """Random decomposed instance.

    Per-step features are drawn on the sphere of radius ``step_norm`` (so
    ``B = H * step_norm``); ``w*`` has norm ``w_norm`` (default ``param_bound``).
    """
    rho = rng.dirichlet(np.full(num_states, dirichlet))
    P = rng.dirichlet(np.full(num_states, dirichlet), size=(num_states, num_actions))
    phi = rng.normal(size=(num_states, num_actions, dim))
    phi *= step_norm / np.linalg.norm(phi, axis=2, keepdims=True)
    w = rng.normal(size=dim)
    w *= (param_bound if w_norm is None else w_norm) / np.linalg.norm(w)
    mdp = Mdp(rho, P, horizon)
    policies = random_policies(rng, num_policies, horizon, num_states, num_actions)
    return Instance(mdp, FeatureMap(per_step=phi), policies, PreferenceModel(w, param_bound))
