"""Preference-based reinforcement learning from trajectory duels."""

from .environment import Duel, Environment, make_rng
from .estimation import DataMatrix, DuelDataset, Estimate
from .features import FeatureMap, feature_bound, policy_features, trajectory_features
from .instances import Instance, random_instance
from .known import KnownModelConfig, KnownModelLearner
from .mdp import Mdp, Policy, PolicyClass
from .oracle import PreferenceModel, kappa, sigmoid
from .unknown import UnknownModelLearner

__version__ = "0.1.0"
