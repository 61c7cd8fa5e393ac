"""Regret accounting against an explicit policy class."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureMap, policy_features
from .mdp import Mdp, PolicyClass
from .oracle import PreferenceModel, sigmoid

SANDWICH_LOWER = 1.0 / (2.0 * (math.e + 1.0))
SANDWICH_SLACK = 1e-12
ARGMAX_TIE = 1e-12


def best_policy(policies: PolicyClass, fmap: FeatureMap, mdp: Mdp, w_star) -> tuple[int, float]:
    """Score-maximizing policy index (lowest on ties) and its score."""
    scores = [float(policy_features(fmap, mdp, p) @ np.asarray(w_star)) for p in policies]
    i = int(np.argmax(scores))
    return i, scores[i]


def score_regret_increment(s_star: float, s1: float, s2: float) -> float:
    return (2.0 * s_star - s1 - s2) / 2.0


def preference_regret_increment(s_star: float, s1: float, s2: float) -> float:
    """``(P(pi* > pi1) + P(pi* > pi2) - 1) / 2`` with ``P = sigmoid(score gap)``."""
    return float((sigmoid(s_star - s1) + sigmoid(s_star - s2) - 1.0) / 2.0)


def policy_preference_regret(model: PreferenceModel, fmap: FeatureMap, mdp: Mdp, policies: PolicyClass,
                             star: int, i: int, j: int) -> float:
    s = [float(policy_features(fmap, mdp, policies[k]) @ model.w_star) for k in (star, i, j)]
    return preference_regret_increment(*s)


@dataclass
class RegretCheckReport:
    score_argmax: int
    preference_argmax: int
    sandwich_applicable: bool
    sandwich_violations: int = 0
    argmax_score_gap: float = 0.0

    @property
    def argmax_ok(self) -> bool:
        # scores closer than rounding are indistinguishable through the sigmoid
        return (self.score_argmax == self.preference_argmax
                or self.argmax_score_gap <= ARGMAX_TIE)

    @property
    def ok(self) -> bool:
        return self.argmax_ok and self.sandwich_violations == 0

    def notes(self) -> list[str]:
        out = []
        if not self.sandwich_applicable:
            out.append("regret sandwich not applicable: S*B >= 1")
        return out


def pref_argmax(scores: np.ndarray) -> int:
    """Maximizer over ``pi`` of ``sum_pi' P(pi > pi')``, i.e. of the preference-regret objective."""
    P = sigmoid(scores[:, None] - scores[None, :])
    return int(np.argmax(P.sum(axis=1)))


def regret_checks(scores: np.ndarray, S: float, B: float, cum_scr=None, cum_pref=None) -> RegretCheckReport:
    """Score vs preference argmax agreement, plus the regret sandwich on cumulative prefixes when ``S*B < 1``.

    ``cum_scr``/``cum_pref`` are arrays of shape ``(runs, T)`` or ``(T,)``.
    """
    scores = np.asarray(scores, dtype=float)
    star, pref = int(np.argmax(scores)), pref_argmax(scores)
    rep = RegretCheckReport(star, pref, S * B < 1, argmax_score_gap=float(scores[star] - scores[pref]))
    if rep.sandwich_applicable and cum_scr is not None:
        r = np.asarray(cum_scr, dtype=float)
        p = np.asarray(cum_pref, dtype=float)
        lo = r * SANDWICH_LOWER - SANDWICH_SLACK
        hi = r / 2.0 + SANDWICH_SLACK
        rep.sandwich_violations = int(np.sum((p < lo) | (p > hi)))
    return rep


def sublinearity_metric(curve) -> float:
    """Least-squares slope of ``log R_t`` against ``log t`` for ``t`` in ``[T/4, T]``."""
    R = np.asarray(curve, dtype=float)
    T = R.shape[0]
    t = np.arange(1, T + 1, dtype=float)
    lo = max(int(math.ceil(T / 4)), 1)
    sel = (t >= lo) & (R > 0)
    if sel.sum() < 2:
        raise ValueError("need at least two positive regret values in [T/4, T]")
    slope, _ = np.polyfit(np.log(t[sel]), np.log(R[sel]), 1)
    return float(slope)
