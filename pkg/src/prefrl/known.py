"""Preference-based RL when the transition model is known."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environment import Duel, Environment
from .estimation import (
    DataMatrix,
    DuelDataset,
    Estimate,
    beta,
    fit_estimate,
    update_data_matrix,
)
from .features import FeatureMap, feature_bound, policy_feature_matrix, trajectory_features
from .mdp import Mdp, PolicyClass
from .oracle import kappa as kappa_of


@dataclass(frozen=True)
class KnownModelConfig:
    lam: float
    delta: float
    T: int
    S: float
    B: float
    d: int
    kappa: float
    tie_break: str = "lowest_index"

    def __post_init__(self):
        if not 0 < self.delta <= math.exp(-1):
            raise ValueError(f"delta must lie in (0, 1/e], got {self.delta}")
        if self.lam < self.B / self.kappa * (1 - 1e-12):
            raise ValueError(f"lambda = {self.lam} is below B / kappa = {self.B / self.kappa:.6g}")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.tie_break != "lowest_index":
            raise ValueError(f"unknown tie_break rule {self.tie_break!r}")

    @classmethod
    def for_instance(cls, fmap: FeatureMap, horizon: int, S: float, T: int, delta: float,
                     lam: float | None = None) -> "KnownModelConfig":
        B = feature_bound(fmap, horizon=horizon)
        k = kappa_of(B, S)
        if lam is None:
            lam = max(1.0, B / k)
        return cls(lam=lam, delta=delta, T=T, S=S, B=B, d=fmap.dim, kappa=k)


def alpha(d: int, T: int, delta: float, B: float, S: float) -> float:
    return 20.0 * B * S * math.sqrt(d * math.log(T * (1 + 2 * T) / delta))


def pairwise_norms(features: np.ndarray, Minv: np.ndarray) -> np.ndarray:
    """``N[i, j] = ||phi_i - phi_j||_{Minv}``."""
    D = features[:, None, :] - features[None, :, :]
    q = np.einsum("ijk,kl,ijl->ij", D, Minv, D)
    return np.sqrt(np.maximum(q, 0.0))


def _members(scores, norms, width, bonus=None):
    # score differences taken from scalar scores keep the argmax feasible exactly
    slack = scores[:, None] - scores[None, :] + width * norms
    if bonus is not None:
        slack = slack + bonus[:, None] + bonus[None, :]
    return tuple(int(i) for i in np.flatnonzero(np.all(slack >= 0, axis=1)))


def candidate_set(features: np.ndarray, w: np.ndarray, Vbar_inv: np.ndarray,
                  threshold: float, norms: np.ndarray | None = None) -> tuple[int, ...]:
    """Indices ``i`` with ``(phi_i - phi_j)^T w + threshold ||phi_i - phi_j|| >= 0`` for all ``j``."""
    if norms is None:
        norms = pairwise_norms(features, Vbar_inv)
    return _members(features @ w, norms, threshold)


def _argmax_pair(candidates, objective: np.ndarray) -> tuple[int, int]:
    if not candidates:
        raise RuntimeError("empty candidate set")
    idx = np.asarray(candidates)
    sub = objective[np.ix_(idx, idx)]
    flat = int(np.argmax(sub))  # first maximum in row-major order = lowest (i, j)
    return int(idx[flat // len(idx)]), int(idx[flat % len(idx)])


def select_pair(candidates, features: np.ndarray, Vbar_inv: np.ndarray,
                norms: np.ndarray | None = None) -> tuple[int, int]:
    """Most uncertain ordered pair inside ``candidates``; ties go to the lowest index pair."""
    if norms is None:
        norms = pairwise_norms(features, Vbar_inv)
    return _argmax_pair(candidates, norms)


@dataclass
class KnownModelState:
    t: int
    V: DataMatrix
    Vbar: DataMatrix
    dataset: DuelDataset
    features: np.ndarray
    estimate: Estimate | None = None
    traj_diffs: list = field(default_factory=list)
    policy_diffs: list = field(default_factory=list)


class KnownModelLearner:
    def __init__(self, config: KnownModelConfig, mdp: Mdp, fmap: FeatureMap, policies: PolicyClass):
        self.config = config
        self.mdp = mdp
        self.fmap = fmap
        self.policies = policies
        c = config
        base = c.kappa * c.lam
        self.alpha = alpha(c.d, c.T, c.delta, c.B, c.S)
        self.state = KnownModelState(
            t=1,
            V=DataMatrix.identity(c.d, base),
            Vbar=DataMatrix.identity(c.d, base),
            dataset=DuelDataset(c.d, c.B),
            features=policy_feature_matrix(fmap, mdp.transitions, mdp.initial_dist, policies,
                                           mdp.horizon),
        )

    def threshold(self, t: int) -> float:
        c = self.config
        return 2 * c.kappa * beta(t, c.delta, c.lam, c.S, c.B, c.d, c.kappa) + self.alpha

    def step(self, env: Environment) -> Duel:
        st, c = self.state, self.config
        st.estimate = fit_estimate(st.dataset, st.V, c.lam, c.S, previous=st.estimate)
        w = st.estimate.w_proj
        thr = self.threshold(st.t)
        norms = pairwise_norms(st.features, st.Vbar.inverse)
        cands = candidate_set(st.features, w, st.Vbar.inverse, thr, norms)
        i, j = select_pair(cands, st.features, st.Vbar.inverse, norms)
        tau1 = env.rollout(self.policies[i])
        tau2 = env.rollout(self.policies[j])
        o = env.compare(tau1, tau2)
        duel = Duel(st.t, (i, j), (tau1, tau2), o, thr, cands, w.copy(), st.V.matrix.copy(),
                    {"projection_gap": st.estimate.projection_gap})
        z = trajectory_features(self.fmap, tau1) - trajectory_features(self.fmap, tau2)
        x = st.features[i] - st.features[j]
        st.dataset.append(z, o)
        st.V = update_data_matrix(st.V, z)
        st.Vbar = update_data_matrix(st.Vbar, x)
        st.traj_diffs.append(z)
        st.policy_diffs.append(x)
        st.t += 1
        return duel
