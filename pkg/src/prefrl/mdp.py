"""Tabular episodic MDPs, deterministic policies and trajectory sampling.

States and actions are dense integer indices. A trajectory is a tuple of
``(state, action)`` pairs of length ``horizon``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

Trajectory = tuple[tuple[int, int], ...]

SUM_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10**6


class MdpError(ValueError):
    pass


class EnumerationError(ValueError):
    """Raised when exact trajectory enumeration is impossible or too large."""


def _check_distribution(row: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(row)):
        raise MdpError(f"{where}: non-finite entry")
    if row.min() < 0:
        raise MdpError(f"{where}: negative entry {row.min():.6g}")
    total = float(row.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise MdpError(f"{where}: row sum {total:.6g} (residual {total - 1.0:.3g})")


@dataclass(frozen=True, eq=False)
class Mdp:
    """Episodic MDP ``(rho, P, H)`` with ``P[s, a, s']`` transition rows."""

    initial_dist: np.ndarray
    transitions: np.ndarray
    horizon: int
    _cdf: tuple = field(init=False, repr=False)

    def __post_init__(self):
        rho = np.array(self.initial_dist, dtype=float)
        P = np.array(self.transitions, dtype=float)
        rho.flags.writeable = False
        P.flags.writeable = False
        object.__setattr__(self, "initial_dist", rho)
        object.__setattr__(self, "transitions", P)
        validate_mdp(self)
        object.__setattr__(self, "_cdf", (np.cumsum(rho), np.cumsum(P, axis=2)))

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]


def validate_mdp(mdp: Mdp) -> None:
    """Raise ``MdpError`` naming the first row that is not a distribution."""
    rho, P, H = mdp.initial_dist, mdp.transitions, mdp.horizon
    if int(H) != H or H < 1:
        raise MdpError(f"horizon must be a positive integer, got {H}")
    if P.ndim != 3 or P.shape[0] < 1 or P.shape[1] < 1 or P.shape[2] != P.shape[0]:
        raise MdpError(f"transitions must have shape (S, A, S), got {P.shape}")
    if rho.shape != (P.shape[0],):
        raise MdpError(f"initial_dist has shape {rho.shape}, expected ({P.shape[0]},)")
    _check_distribution(rho, "initial_dist")
    for s in range(P.shape[0]):
        for a in range(P.shape[1]):
            _check_distribution(P[s, a], f"transitions[{s}, {a}]")


def _draw(cdf: np.ndarray, u: float) -> int:
    i = int(np.searchsorted(cdf, u, side="right"))
    return min(i, cdf.shape[0] - 1)


class Policy:
    """Deterministic policy.

    A Markov policy is an ``(H, S)`` action table. A history-dependent policy
    is an explicit mapping ``(prefix, state) -> action`` where ``prefix`` is
    the tuple of ``(s, a)`` pairs played so far.
    """

    __slots__ = ("actions", "history")

    def __init__(self, actions=None, history: Mapping | None = None):
        if (actions is None) == (history is None):
            raise ValueError("give exactly one of a Markov table or a history table")
        if actions is not None:
            actions = np.array(actions, dtype=np.int64)
            if actions.ndim != 2:
                raise ValueError("Markov action table must be 2-d (H, S)")
            actions.flags.writeable = False
        self.actions = actions
        self.history = dict(history) if history is not None else None

    @classmethod
    def markov(cls, actions) -> "Policy":
        return cls(actions=actions)

    @classmethod
    def history_dependent(cls, table: Mapping) -> "Policy":
        return cls(history=table)

    @property
    def kind(self) -> str:
        return "markov_deterministic" if self.actions is not None else "history_dependent"

    @property
    def is_markov(self) -> bool:
        return self.actions is not None

    def act(self, h: int, prefix: Trajectory, state: int) -> int:
        """Action at step ``h`` (0-based) after ``prefix`` in ``state``."""
        if self.actions is not None:
            return int(self.actions[h, state])
        try:
            return int(self.history[(prefix, state)])
        except KeyError:
            raise KeyError(f"history policy undefined at prefix={prefix}, state={state}") from None

    def key(self):
        if self.actions is not None:
            return ("markov", self.actions.tobytes(), self.actions.shape)
        return ("history", tuple(sorted(self.history.items())))

    def check(self, mdp: Mdp) -> None:
        H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
        if self.actions is not None:
            if self.actions.shape != (H, S):
                raise ValueError(f"Markov table shape {self.actions.shape} != ({H}, {S})")
            if self.actions.min() < 0 or self.actions.max() >= A:
                raise ValueError("Markov table has out-of-range actions")
        else:
            # totality on reachable prefixes is checked by enumerating them
            enumerate_trajectories(mdp, self, cap=None)

    def __repr__(self):
        if self.actions is not None:
            return f"Policy.markov({self.actions.tolist()})"
        return f"Policy.history_dependent(<{len(self.history)} entries>)"


class PolicyClass(Sequence):
    """Explicit finite ordered policy class."""

    def __init__(self, policies):
        self.policies = tuple(policies)
        if not self.policies:
            raise ValueError("policy class is empty")
        seen = {}
        for i, p in enumerate(self.policies):
            k = p.key()
            if k in seen:
                raise ValueError(f"policies {seen[k]} and {i} have identical decision rules")
            seen[k] = i

    def __len__(self):
        return len(self.policies)

    def __getitem__(self, i):
        return self.policies[i]

    def __iter__(self) -> Iterator[Policy]:
        return iter(self.policies)

    @property
    def all_markov(self) -> bool:
        return all(p.is_markov for p in self.policies)

    def action_tables(self) -> np.ndarray:
        """Stacked ``(K, H, S)`` Markov tables."""
        return np.stack([p.actions for p in self.policies])


def sample_trajectory(mdp: Mdp, policy: Policy, rng: np.random.Generator) -> Trajectory:
    rho_cdf, p_cdf = mdp._cdf
    H = mdp.horizon
    u = rng.random(H)
    s = _draw(rho_cdf, u[0])
    steps = []
    for h in range(H):
        a = policy.act(h, tuple(steps), s)
        steps.append((s, a))
        if h + 1 < H:
            s = _draw(p_cdf[s, a], u[h + 1])
    return tuple(steps)


def occupancy_in_model(initial_dist, transitions, horizon: int, policy: Policy) -> np.ndarray:
    """``d[h, s, a]`` for a Markov policy under an arbitrary model."""
    if not policy.is_markov:
        raise EnumerationError("enumeration required: occupancy DP needs a Markov policy")
    return occupancy_batch(initial_dist, transitions, horizon, policy.actions[None])[0]


def occupancy_batch(initial_dist, transitions, horizon: int, actions: np.ndarray) -> np.ndarray:
    """Occupancy measures ``(K, H, S, A)`` for stacked Markov tables ``(K, H, S)``."""
    P = np.asarray(transitions)
    S, A = P.shape[0], P.shape[1]
    K = actions.shape[0]
    onehot = np.zeros((K, horizon, S, A))
    kk, hh, ss = np.indices(actions.shape)
    onehot[kk, hh, ss, actions] = 1.0
    d = np.empty((K, horizon, S, A))
    mu = np.broadcast_to(np.asarray(initial_dist, dtype=float), (K, S))
    for h in range(horizon):
        d[:, h] = mu[:, :, None] * onehot[:, h]
        if h + 1 < horizon:
            mu = np.einsum("ksa,sat->kt", d[:, h], P)
    return d


def occupancy_measures(mdp: Mdp, policy: Policy) -> np.ndarray:
    return occupancy_in_model(mdp.initial_dist, mdp.transitions, mdp.horizon, policy)


def enumerate_in_model(initial_dist, transitions, horizon: int, policy: Policy,
                       cap: int | None = DEFAULT_ENUMERATION_CAP) -> list[tuple[Trajectory, float]]:
    P = np.asarray(transitions)
    S, A = P.shape[0], P.shape[1]
    if cap is not None and (S * A) ** horizon > cap:
        raise EnumerationError(f"(|S||A|)^H = {(S * A) ** horizon} exceeds cap {cap}")
    frontier = [((), int(s), float(p)) for s, p in enumerate(initial_dist) if p > 0]
    out = []
    for h in range(horizon):
        nxt = []
        for prefix, s, prob in frontier:
            a = policy.act(h, prefix, s)
            path = prefix + ((s, a),)
            if h + 1 == horizon:
                out.append((path, prob))
                continue
            row = P[s, a]
            for s2 in np.flatnonzero(row > 0):
                nxt.append((path, int(s2), prob * float(row[s2])))
        frontier = nxt
    return out


def enumerate_trajectories(mdp: Mdp, policy: Policy,
                           cap: int | None = DEFAULT_ENUMERATION_CAP) -> list[tuple[Trajectory, float]]:
    """All positive-probability trajectories of ``policy`` with their probabilities."""
    return enumerate_in_model(mdp.initial_dist, mdp.transitions, mdp.horizon, policy, cap)


def marginals_in_model(initial_dist, transitions, horizon: int, policy: Policy,
                       cap: int | None = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Per-step state-action marginals ``(H, S, A)`` for any policy.

    Markov policies use the occupancy recursion; history-dependent ones are
    enumerated.
    """
    if policy.is_markov:
        return occupancy_in_model(initial_dist, transitions, horizon, policy)
    P = np.asarray(transitions)
    d = np.zeros((horizon, P.shape[0], P.shape[1]))
    for traj, prob in enumerate_in_model(initial_dist, transitions, horizon, policy, cap):
        for h, (s, a) in enumerate(traj):
            d[h, s, a] += prob
    return d
