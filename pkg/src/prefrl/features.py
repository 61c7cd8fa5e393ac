"""Trajectory and policy embeddings."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .mdp import (
    DEFAULT_ENUMERATION_CAP,
    Mdp,
    Policy,
    PolicyClass,
    Trajectory,
    enumerate_in_model,
    marginals_in_model,
    occupancy_batch,
)


class CoverageError(KeyError):
    pass


class FeatureMap:
    """Trajectory embedding ``phi(tau)`` in ``R^d``.

    ``per_step`` of shape ``(S, A, d)`` gives a decomposed map
    ``phi(tau) = sum_h phi(s_h, a_h)``; ``table`` maps whole trajectories to
    vectors.
    """

    def __init__(self, per_step=None, table: Mapping[Trajectory, np.ndarray] | None = None,
                 dim: int | None = None):
        if (per_step is None) == (table is None):
            raise ValueError("give exactly one of per_step or table")
        if per_step is not None:
            per_step = np.array(per_step, dtype=float)
            if per_step.ndim != 3:
                raise ValueError("per_step table must have shape (S, A, d)")
            if not np.all(np.isfinite(per_step)):
                raise ValueError("per_step table has non-finite entries")
            per_step.flags.writeable = False
            dim = per_step.shape[2]
            self.table = None
        else:
            vecs = {}
            for traj, v in table.items():
                key = tuple((int(s), int(a)) for s, a in traj)
                v = np.array(v, dtype=float)
                if dim is None:
                    dim = v.shape[0]
                if v.shape != (dim,) or not np.all(np.isfinite(v)):
                    raise ValueError(f"bad feature vector for trajectory {key}")
                v.flags.writeable = False
                vecs[key] = v
            self.table = vecs
        self.per_step = per_step
        self.dim = int(dim)

    @property
    def kind(self) -> str:
        return "decomposed" if self.per_step is not None else "tabular"

    def __repr__(self):
        return f"FeatureMap(kind={self.kind!r}, dim={self.dim})"


def trajectory_features(fmap: FeatureMap, traj: Trajectory) -> np.ndarray:
    if fmap.per_step is not None:
        steps = np.asarray(traj, dtype=np.int64)
        return fmap.per_step[steps[:, 0], steps[:, 1]].sum(axis=0)
    try:
        return fmap.table[tuple(traj)].copy()
    except KeyError:
        raise CoverageError(f"trajectory {traj} missing from feature table") from None


def policy_features_in_model(fmap: FeatureMap, transitions, initial_dist, policy: Policy,
                             horizon: int, cap: int | None = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Expected trajectory feature of ``policy`` when dynamics follow ``transitions``."""
    if fmap.per_step is not None:
        d = marginals_in_model(initial_dist, transitions, horizon, policy, cap)
        return np.einsum("hsa,sad->d", d, fmap.per_step)
    out = np.zeros(fmap.dim)
    for traj, prob in enumerate_in_model(initial_dist, transitions, horizon, policy, cap):
        out += prob * trajectory_features(fmap, traj)
    return out


def policy_features(fmap: FeatureMap, mdp: Mdp, policy: Policy) -> np.ndarray:
    return policy_features_in_model(fmap, mdp.transitions, mdp.initial_dist, policy, mdp.horizon)


def policy_feature_matrix(fmap: FeatureMap, transitions, initial_dist, policies: PolicyClass,
                          horizon: int, marginals: np.ndarray | None = None) -> np.ndarray:
    """Stacked ``(K, d)`` policy embeddings for a whole class.

    ``marginals`` may carry precomputed ``(K, H, S, A)`` occupancies.
    """
    if fmap.per_step is not None:
        if marginals is None:
            marginals = class_marginals(transitions, initial_dist, policies, horizon)
        return np.einsum("khsa,sad->kd", marginals, fmap.per_step)
    return np.stack([policy_features_in_model(fmap, transitions, initial_dist, p, horizon)
                     for p in policies])


def class_marginals(transitions, initial_dist, policies: PolicyClass, horizon: int) -> np.ndarray:
    if policies.all_markov:
        return occupancy_batch(initial_dist, transitions, horizon, policies.action_tables())
    return np.stack([marginals_in_model(initial_dist, transitions, horizon, p) for p in policies])


def feature_bound(fmap: FeatureMap, mdp: Mdp | None = None, horizon: int | None = None) -> float:
    """Known bound ``B >= ||phi(tau)||`` (loose ``H * max ||phi(s, a)||`` when decomposed)."""
    if fmap.per_step is not None:
        H = horizon if horizon is not None else mdp.horizon
        return float(H * np.linalg.norm(fmap.per_step, axis=2).max())
    return float(max(np.linalg.norm(v) for v in fmap.table.values()))
