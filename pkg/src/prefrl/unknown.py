"""Preference-based RL with unknown transitions: counts, empirical model and bonuses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environment import Duel, Environment
from .estimation import DataMatrix, DuelDataset, Estimate, beta, fit_estimate, update_data_matrix
from .features import FeatureMap, class_marginals, policy_feature_matrix, trajectory_features
from .known import KnownModelConfig, _argmax_pair, _members, alpha, pairwise_norms
from .mdp import Policy, PolicyClass, Trajectory, marginals_in_model


@dataclass
class VisitCounts:
    """``N[s, a]`` visits and ``M[s, a, s']`` observed transitions."""

    N: np.ndarray
    M: np.ndarray

    @classmethod
    def zeros(cls, num_states: int, num_actions: int) -> "VisitCounts":
        return cls(np.zeros((num_states, num_actions), dtype=np.int64),
                   np.zeros((num_states, num_actions, num_states), dtype=np.int64))

    def copy(self) -> "VisitCounts":
        return VisitCounts(self.N.copy(), self.M.copy())


def record_trajectory(counts: VisitCounts, traj: Trajectory) -> None:
    """In-place count update along ``traj``."""
    for h, (s, a) in enumerate(traj):
        counts.N[s, a] += 1
        if h + 1 < len(traj):
            counts.M[s, a, traj[h + 1][0]] += 1


def update_counts(counts: VisitCounts, traj: Trajectory) -> VisitCounts:
    out = counts.copy()
    record_trajectory(out, traj)
    return out


def empirical_model(counts: VisitCounts) -> np.ndarray:
    """Frequency estimate of ``P``; rows with no observed transition are uniform.

    Visits at the last step carry no transition, so rows are normalized by the
    observed transition total ``sum_s' M[s, a, s']``.
    """
    M = counts.M.astype(float)
    tot = M.sum(axis=2, keepdims=True)
    S = M.shape[2]
    with np.errstate(invalid="ignore", divide="ignore"):
        P = np.where(tot > 0, M / np.where(tot > 0, tot, 1.0), 1.0 / S)
    return P


def _log_inv(delta, log_inv_delta):
    if log_inv_delta is not None:
        return log_inv_delta
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return -math.log(delta)


def _xi(N, eta, base_U, log_inv_delta):
    N = np.asarray(N, dtype=float)
    out = np.full(np.broadcast(N, np.asarray(log_inv_delta)).shape, 2.0 * eta)
    big = np.broadcast_to(N > 1, out.shape)
    if np.any(big):
        Nb = np.broadcast_to(N, out.shape)[big]
        lid = np.broadcast_to(np.asarray(log_inv_delta, dtype=float), out.shape)[big]
        U = base_U + np.log(6.0 * np.log(Nb)) + lid
        out[big] = np.minimum(2.0 * eta, 4.0 * eta * np.sqrt(U / Nb))
    return out[()] if out.ndim == 0 else out


def xi_hat(N, eta: float, delta: float | None, H: int, num_states: int, num_actions: int,
           *, log_inv_delta=None):
    """Per state-action bonus ``min(2 eta, 4 eta sqrt(U / N))``; ``2 eta`` when ``N <= 1``.

    ``log_inv_delta`` replaces ``log(1/delta)`` for confidence levels too small
    to represent; it may be an array broadcasting against ``N``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    lid = _log_inv(delta, log_inv_delta)
    return _xi(N, eta, H * math.log(num_states * num_actions), lid)


def xi_eps(N, eps: float, eta: float, delta: float | None, H: int, num_states: int,
           num_actions: int, *, log_inv_delta=None):
    """Bonus with the covering term ``|S| log ceil(4 eta H / eps)`` added to ``U``."""
    if eta <= 0 or eps <= 0:
        raise ValueError("eta and eps must be positive")
    lid = _log_inv(delta, log_inv_delta)
    base = H * math.log(num_states * num_actions * H) + num_states * math.log(math.ceil(4 * eta * H / eps))
    return _xi(N, eta, base, lid)


def bonus_expectation(transitions, initial_dist, policy: Policy, xi_table: np.ndarray,
                      horizon: int) -> float:
    """Expected ``sum_{h < H} xi(s_h, a_h)`` along ``policy`` in the given model."""
    d = marginals_in_model(initial_dist, transitions, horizon, policy)
    return float(np.einsum("hsa,sa->", d[: horizon - 1], xi_table))


def bonus_vector(marginals: np.ndarray, xi_table: np.ndarray) -> np.ndarray:
    """``bonus_expectation`` for every policy from stacked ``(K, H, S, A)`` marginals."""
    return np.einsum("khsa,sa->k", marginals[:, :-1], xi_table)


def gamma(t: int, kappa: float, beta_t: float, alpha_T: float, logged_bonuses) -> float:
    """Radius multiplier from ``(t - 1, 2)`` bonus values of the past duels."""
    if t < 1:
        raise ValueError("t must be at least 1")
    b = np.asarray(logged_bonuses, dtype=float).reshape(-1)
    return math.sqrt(2) * (4 * kappa * beta_t + alpha_T) + 2 * math.sqrt(float(b @ b)) + 1.0 / t


def gamma_log_levels(t: int, delta: float, S: float, B: float, d: int, kappa: float, lam: float,
                     num_states: int, num_actions: int) -> np.ndarray:
    """``log(1/delta_l)`` for ``l = 1..t-1`` with ``delta_l = delta' / (8 l^3 |A|^|S|)``.

    ``delta' = delta / ((1 + 4S) / eps)^d`` and ``eps = 1 / (t^2 kappa lam + 4 B^2 t^3)``.
    """
    eps = 1.0 / (t * t * kappa * lam + 4 * B * B * t**3)
    log_inv_dprime = -math.log(delta) + d * math.log((1 + 4 * S) / eps)
    ell = np.arange(1, t, dtype=float)
    return log_inv_dprime + math.log(8) + 3 * np.log(ell) + num_states * math.log(num_actions)


def candidate_set_unknown(features: np.ndarray, w: np.ndarray, Vtilde_inv: np.ndarray,
                          gamma_t: float, bonus: np.ndarray,
                          norms: np.ndarray | None = None) -> tuple[int, ...]:
    """Indices ``i`` whose score gap to every ``j``, widened by ``gamma_t`` and both bonuses, is >= 0."""
    if norms is None:
        norms = pairwise_norms(features, Vtilde_inv)
    return _members(features @ w, norms, gamma_t, np.asarray(bonus, dtype=float))


def select_pair_unknown(candidates, features: np.ndarray, Vtilde_inv: np.ndarray, gamma_t: float,
                        bonus: np.ndarray, norms: np.ndarray | None = None) -> tuple[int, int]:
    """Ordered pair maximizing ``gamma_t ||phi_i - phi_j|| + 2 b_i + 2 b_j``; lowest index on ties."""
    if norms is None:
        norms = pairwise_norms(features, Vtilde_inv)
    bonus = np.asarray(bonus, dtype=float)
    return _argmax_pair(candidates, gamma_t * norms + 2 * bonus[:, None] + 2 * bonus[None, :])


UnknownModelConfig = KnownModelConfig


@dataclass
class UnknownModelState:
    t: int
    V: DataMatrix
    Vtilde: DataMatrix
    counts: VisitCounts
    dataset: DuelDataset
    estimate: Estimate | None = None
    pairs: list = field(default_factory=list)
    model_diffs: list = field(default_factory=list)


class UnknownModelLearner:
    """Learner that only knows ``rho``, ``H``, the state/action spaces and ``phi``.

    ``frozen_model`` pins the model used for embeddings in place of the
    empirical one and ``zero_bonus`` switches every bonus off; together they
    reduce the learner to the known-model rule with a wider radius.
    """

    def __init__(self, config: UnknownModelConfig, initial_dist, horizon: int, num_states: int,
                 num_actions: int, fmap: FeatureMap, policies: PolicyClass,
                 frozen_model: np.ndarray | None = None, zero_bonus: bool = False):
        self.config = config
        self.initial_dist = np.asarray(initial_dist, dtype=float)
        self.horizon = horizon
        self.num_states = num_states
        self.num_actions = num_actions
        self.fmap = fmap
        self.policies = policies
        self.frozen_model = None if frozen_model is None else np.asarray(frozen_model, dtype=float)
        self.zero_bonus = zero_bonus
        c = config
        self.alpha = alpha(c.d, c.T, c.delta, c.B, c.S)
        self.eta = 2 * c.S * c.B
        base = c.kappa * c.lam
        self.state = UnknownModelState(
            t=1,
            V=DataMatrix.identity(c.d, base),
            Vtilde=DataMatrix.identity(c.d, base),
            counts=VisitCounts.zeros(num_states, num_actions),
            dataset=DuelDataset(c.d, c.B),
        )

    def model(self) -> np.ndarray:
        if self.frozen_model is not None:
            return self.frozen_model
        return empirical_model(self.state.counts)

    def _xi(self, delta=None, log_inv_delta=None):
        return xi_hat(self.state.counts.N, self.eta, delta, self.horizon, self.num_states,
                      self.num_actions, log_inv_delta=log_inv_delta)

    def bonuses(self, marginals: np.ndarray) -> dict:
        """All bonus quantities of the current round from ``(K, H, S, A)`` marginals."""
        st, c = self.state, self.config
        K = marginals.shape[0]
        if self.zero_bonus:
            return {"candidate": np.zeros(K), "selection": np.zeros(K),
                    "logged": np.zeros((st.t - 1, 2))}
        log_s_a = self.num_states * math.log(self.num_actions)
        cand = bonus_vector(marginals, self._xi(log_inv_delta=-math.log(c.delta / 2) + log_s_a))
        sel = bonus_vector(marginals, self._xi(delta=c.delta))
        logged = np.zeros((st.t - 1, 2))
        if st.t > 1:
            levels = gamma_log_levels(st.t, c.delta, c.S, c.B, c.d, c.kappa, c.lam,
                                      self.num_states, self.num_actions)
            xis = self._xi(log_inv_delta=levels[:, None, None])  # (t-1, S, A)
            occ = marginals[:, :-1].sum(axis=1)  # (K, S, A)
            pairs = np.asarray(st.pairs)
            for k in range(2):
                logged[:, k] = np.einsum("lsa,lsa->l", occ[pairs[:, k]], xis)
        return {"candidate": cand, "selection": sel, "logged": logged}

    def step(self, env: Environment) -> Duel:
        st, c = self.state, self.config
        P_hat = self.model()
        marg = class_marginals(P_hat, self.initial_dist, self.policies, self.horizon)
        feats = policy_feature_matrix(self.fmap, P_hat, self.initial_dist, self.policies,
                                      self.horizon, marginals=marg)
        st.estimate = fit_estimate(st.dataset, st.V, c.lam, c.S, previous=st.estimate)
        w = st.estimate.w_proj
        b = self.bonuses(marg)
        beta_t = beta(st.t, c.delta, c.lam, c.S, c.B, c.d, c.kappa)
        g = gamma(st.t, c.kappa, beta_t, self.alpha, b["logged"])
        norms = pairwise_norms(feats, st.Vtilde.inverse)
        cands = candidate_set_unknown(feats, w, st.Vtilde.inverse, g, b["candidate"], norms)
        i, j = select_pair_unknown(cands, feats, st.Vtilde.inverse, g, b["selection"], norms)
        tau1 = env.rollout(self.policies[i])
        tau2 = env.rollout(self.policies[j])
        o = env.compare(tau1, tau2)
        duel = Duel(st.t, (i, j), (tau1, tau2), o, g, cands, w.copy(), st.V.matrix.copy(),
                    {"projection_gap": st.estimate.projection_gap,
                     "max_xi": float(self._xi(delta=c.delta).max()) if not self.zero_bonus else 0.0,
                     "bonus_selection": b["selection"],
                     "visits": st.counts.N.copy()})
        z = trajectory_features(self.fmap, tau1) - trajectory_features(self.fmap, tau2)
        x = feats[i] - feats[j]
        st.dataset.append(z, o)
        st.V = update_data_matrix(st.V, z)
        st.Vtilde = update_data_matrix(st.Vtilde, x)
        record_trajectory(st.counts, tau1)
        record_trajectory(st.counts, tau2)
        st.pairs.append((i, j))
        st.model_diffs.append(x)
        st.t += 1
        return duel
