"""The world a learner interacts with: rollouts and preference queries.

Learners receive an ``Environment`` and never the ``PreferenceModel`` inside
it, so ``w*`` stays hidden from learner state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMap
from .mdp import Mdp, Policy, Trajectory, sample_trajectory
from .oracle import PreferenceModel, sample_preference


class Environment:
    def __init__(self, mdp: Mdp, fmap: FeatureMap, model: PreferenceModel,
                 rng: np.random.Generator):
        self.mdp = mdp
        self._fmap = fmap
        self._model = model
        self._rng = rng

    def rollout(self, policy: Policy) -> Trajectory:
        return sample_trajectory(self.mdp, policy, self._rng)

    def compare(self, traj1: Trajectory, traj2: Trajectory) -> int:
        return sample_preference(self._rng, self._model, self._fmap, traj1, traj2)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every stochastic operation."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class Duel:
    """What a learner did in one round."""

    t: int
    pair: tuple[int, int]
    trajectories: tuple[Trajectory, Trajectory]
    outcome: int
    radius: float
    candidates: tuple[int, ...]
    w_proj: np.ndarray
    V: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def set_size(self) -> int:
        return len(self.candidates)
