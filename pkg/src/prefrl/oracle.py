"""Logistic trajectory-preference model."""

from __future__ import annotations

import math

import numpy as np

from .features import FeatureMap, policy_features, trajectory_features
from .mdp import Mdp, Policy, Trajectory

KAPPA_MAX_ARG = 700.0


def sigmoid(x):
    """Logistic function, stable for large ``|x|``.

    Works on scalars and arrays. ``sigmoid(x) + sigmoid(-x) == 1`` up to one
    rounding of the ``1 + e`` denominator.
    """
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out[()] if out.ndim == 0 else out


def sigmoid_prime(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


class PreferenceModel:
    """Hidden parameter ``w*`` with known norm bound ``S``."""

    def __init__(self, w_star, param_bound: float):
        self.w_star = np.array(w_star, dtype=float)
        self.w_star.flags.writeable = False
        self.param_bound = float(param_bound)
        if self.param_bound <= 0:
            raise ValueError("param_bound must be positive")
        norm = float(np.linalg.norm(self.w_star))
        if norm > self.param_bound + 1e-12:
            raise ValueError(f"||w*|| = {norm:.6g} exceeds S = {self.param_bound:.6g}")

    def __repr__(self):
        return f"PreferenceModel(d={self.w_star.shape[0]}, S={self.param_bound})"


def _dot(model: PreferenceModel, v: np.ndarray) -> float:
    if v.shape != model.w_star.shape:
        raise ValueError(f"dimension mismatch: feature {v.shape} vs w* {model.w_star.shape}")
    return float(v @ model.w_star)


def trajectory_score(model: PreferenceModel, fmap: FeatureMap, traj: Trajectory) -> float:
    return _dot(model, trajectory_features(fmap, traj))


def policy_score(model: PreferenceModel, fmap: FeatureMap, mdp: Mdp, policy: Policy) -> float:
    return _dot(model, policy_features(fmap, mdp, policy))


def preference_prob(model: PreferenceModel, fmap: FeatureMap, traj1: Trajectory,
                    traj2: Trajectory) -> float:
    """Probability that ``traj1`` beats ``traj2``."""
    z = trajectory_features(fmap, traj1) - trajectory_features(fmap, traj2)
    return float(sigmoid(_dot(model, z)))


def sample_preference(rng: np.random.Generator, model: PreferenceModel, fmap: FeatureMap,
                      traj1: Trajectory, traj2: Trajectory) -> int:
    """1 if ``traj1`` is preferred."""
    return int(rng.random() < preference_prob(model, fmap, traj1, traj2))


def kappa(B: float, S: float) -> float:
    """Worst inverse sigmoid slope over ``|w^T x| <= S * B``."""
    if B < 0 or S < 0:
        raise ValueError("B and S must be nonnegative")
    x = S * B
    if x > KAPPA_MAX_ARG:
        raise OverflowError(f"kappa overflows for S*B = {x:.6g} > {KAPPA_MAX_ARG}")
    # 1 / (sigma(x) (1 - sigma(x))) = 2 + e^x + e^-x
    return 2.0 + math.exp(x) + math.exp(-x)
