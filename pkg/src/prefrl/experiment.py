"""Experiment configuration, seeded runs, baselines and aggregation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environment import Environment, make_rng
from .estimation import beta, data_matrix_from, weighted_distance
from .features import FeatureMap, feature_bound
from .instances import Instance
from .known import KnownModelConfig, KnownModelLearner
from .mdp import Mdp, Policy, PolicyClass, validate_mdp
from .oracle import PreferenceModel, kappa
from .regret import regret_checks, preference_regret_increment, score_regret_increment
from .unknown import UnknownModelLearner

SCHEMA_VERSION = 1
ALGORITHMS = ("known", "unknown", "baseline")


class ConfigError(ValueError):
    pass


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


def _require(obj: dict, keys, where: str) -> None:
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")


def _traj(raw) -> tuple:
    return tuple((int(s), int(a)) for s, a in raw)


@dataclass
class ExperimentConfig:
    instance: Instance
    algorithm: str = "known"
    lam: float | None = None
    delta: float = 0.1
    T: int = 100
    seeds: list = field(default_factory=lambda: [0])
    output: str = "out"
    plot: bool = True
    labels: dict | None = None

    MDP_KEYS = {"initial_dist", "transitions", "horizon"}
    TOP_KEYS = {"schema", "mdp", "features", "policies", "w_star", "hidden", "S", "algorithm",
                "lambda", "delta", "T", "seeds", "output", "plot", "labels"}

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _reject_unknown(raw, cls.TOP_KEYS, "config")
        _require(raw, ["schema", "mdp", "features", "policies", "w_star", "S"], "config")
        if raw["schema"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {raw['schema']!r}, expected {SCHEMA_VERSION}")
        m = raw["mdp"]
        _reject_unknown(m, cls.MDP_KEYS, "mdp")
        _require(m, cls.MDP_KEYS, "mdp")
        try:
            mdp = Mdp(m["initial_dist"], m["transitions"], int(m["horizon"]))
        except ValueError as e:
            raise ConfigError(f"mdp: {e}") from None
        fmap = _parse_features(raw["features"])
        policies = _parse_policies(raw["policies"], mdp)
        w = np.asarray(raw["w_star"], dtype=float)
        if w.shape != (fmap.dim,):
            raise ConfigError(f"w_star has length {w.shape}, features have d = {fmap.dim}")
        if fmap.per_step is not None and fmap.per_step.shape[:2] != (mdp.num_states, mdp.num_actions):
            raise ConfigError("features.per_step must have shape (|S|, |A|, d)")
        try:
            model = PreferenceModel(w, raw["S"])
        except ValueError as e:
            raise ConfigError(str(e)) from None
        algo = raw.get("algorithm", "known")
        if algo not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {algo!r}")
        seeds = raw.get("seeds", [0])
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds must be a list of integers")
        T = int(raw.get("T", 100))
        if T < 0:
            raise ConfigError("T must be nonnegative")
        return cls(Instance(mdp, fmap, policies, model), algo, raw.get("lambda"),
                   float(raw.get("delta", 0.1)), T, seeds, raw.get("output", "out"),
                   bool(raw.get("plot", True)), raw.get("labels"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def learner_config(self) -> KnownModelConfig:
        inst = self.instance
        return KnownModelConfig.for_instance(inst.fmap, inst.mdp.horizon, inst.model.param_bound,
                                             max(self.T, 1), self.delta, self.lam)


def _parse_features(raw: dict) -> FeatureMap:
    _reject_unknown(raw, {"kind", "per_step", "table"}, "features")
    kind = raw.get("kind")
    if kind == "decomposed":
        _require(raw, ["per_step"], "features")
        return FeatureMap(per_step=raw["per_step"])
    if kind == "tabular":
        _require(raw, ["table"], "features")
        table = {}
        for k, entry in enumerate(raw["table"]):
            _reject_unknown(entry, {"trajectory", "vector"}, f"features.table[{k}]")
            table[_traj(entry["trajectory"])] = entry["vector"]
        return FeatureMap(table=table)
    raise ConfigError(f"features.kind must be 'decomposed' or 'tabular', got {kind!r}")


def _parse_policies(raw: list, mdp: Mdp) -> PolicyClass:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("policies must be a nonempty list")
    out = []
    for k, p in enumerate(raw):
        where = f"policies[{k}]"
        _reject_unknown(p, {"kind", "actions", "table"}, where)
        if p.get("kind") == "markov":
            pol = Policy.markov(p["actions"])
        elif p.get("kind") == "history":
            table = {}
            for e in p["table"]:
                _reject_unknown(e, {"prefix", "state", "action"}, where)
                table[(_traj(e["prefix"]), int(e["state"]))] = int(e["action"])
            pol = Policy.history_dependent(table)
        else:
            raise ConfigError(f"{where}: kind must be 'markov' or 'history'")
        try:
            pol.check(mdp)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"{where}: {e}") from None
        out.append(pol)
    try:
        return PolicyClass(out)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def instance_to_dict(inst: Instance) -> dict:
    """Inverse of the instance part of ``ExperimentConfig.from_dict``."""
    m = inst.mdp
    if inst.fmap.per_step is not None:
        feats = {"kind": "decomposed", "per_step": inst.fmap.per_step.tolist()}
    else:
        feats = {"kind": "tabular", "table": [{"trajectory": [list(x) for x in k], "vector": v.tolist()}
                                               for k, v in inst.fmap.table.items()]}
    pols = []
    for p in inst.policies:
        if p.is_markov:
            pols.append({"kind": "markov", "actions": p.actions.tolist()})
        else:
            pols.append({"kind": "history", "table": [
                {"prefix": [list(x) for x in pre], "state": s, "action": a}
                for (pre, s), a in p.history.items()]})
    return {"schema": SCHEMA_VERSION,
            "mdp": {"initial_dist": m.initial_dist.tolist(), "transitions": m.transitions.tolist(),
                    "horizon": m.horizon},
            "features": feats, "policies": pols,
            "w_star": inst.model.w_star.tolist(), "S": inst.model.param_bound}


@dataclass
class RoundRecord:
    t: int
    seed: int
    pair: tuple[int, int]
    trajectories: tuple | None
    outcome: int | None
    regret_scr: float
    regret_pref: float
    radius: float
    set_size: int
    covered: bool | None = None


@dataclass
class SeedRun:
    seed: int
    records: list
    checks: dict


@dataclass
class RegretCurve:
    """Cumulative regret per seed, shape ``(n_seeds, T)``."""

    seeds: list
    cum_scr: np.ndarray
    cum_pref: np.ndarray
    radius: np.ndarray
    set_size: np.ndarray

    @property
    def T(self) -> int:
        return self.cum_scr.shape[1]

    def mean(self, which: str = "scr") -> np.ndarray:
        return getattr(self, f"cum_{which}").mean(axis=0)

    def stderr(self, which: str = "scr") -> np.ndarray:
        x = getattr(self, f"cum_{which}")
        if x.shape[0] < 2:
            return np.zeros(x.shape[1])
        return x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])

    def median(self, which: str = "scr") -> np.ndarray:
        return np.median(getattr(self, f"cum_{which}"), axis=0)

    @classmethod
    def from_runs(cls, runs: list, T: int) -> "RegretCurve":
        n = len(runs)
        shape = (n, T)
        scr, pref, rad, size = (np.zeros(shape) for _ in range(4))
        size = size.astype(np.int64)
        for k, run in enumerate(runs):
            if T:
                scr[k] = np.cumsum([r.regret_scr for r in run.records])
                pref[k] = np.cumsum([r.regret_pref for r in run.records])
                rad[k] = [r.radius for r in run.records]
                size[k] = [r.set_size for r in run.records]
        return cls([r.seed for r in runs], scr, pref, rad, size)

    def equals(self, other: "RegretCurve") -> bool:
        return (list(self.seeds) == list(other.seeds)
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("cum_scr", "cum_pref", "radius", "set_size")))


def make_learner(algorithm: str, inst: Instance, cfg: KnownModelConfig):
    m = inst.mdp
    if algorithm == "known":
        return KnownModelLearner(cfg, m, inst.fmap, inst.policies)
    if algorithm == "unknown":
        return UnknownModelLearner(cfg, m.initial_dist, m.horizon, m.num_states, m.num_actions,
                                   inst.fmap, inst.policies)
    raise ValueError(f"no learner for algorithm {algorithm!r}")


def run_seed(inst: Instance, algorithm: str, cfg: KnownModelConfig, T: int, seed: int,
             learner=None, scores: np.ndarray | None = None) -> SeedRun:
    """Run ``T`` rounds with one seed and account regret against the class optimum."""
    if scores is None:
        scores = inst.policy_scores()
    star = int(np.argmax(scores))
    s_star = float(scores[star])
    rng = make_rng(seed)
    records = []
    if algorithm == "baseline":
        K = len(inst.policies)
        for t in range(1, T + 1):
            i, j = (int(x) for x in rng.integers(K, size=2))
            records.append(RoundRecord(t, seed, (i, j), None, None,
                                       score_regret_increment(s_star, scores[i], scores[j]),
                                       preference_regret_increment(s_star, scores[i], scores[j]),
                                       0.0, K))
        return SeedRun(seed, records, {})
    env = Environment(inst.mdp, inst.fmap, inst.model, rng)
    if learner is None:
        learner = make_learner(algorithm, inst, cfg)
    w = inst.model.w_star
    for _ in range(T):
        duel = learner.step(env)
        i, j = duel.pair
        radius_conf = 2 * cfg.kappa * beta(duel.t, cfg.delta, cfg.lam, cfg.S, cfg.B, cfg.d, cfg.kappa)
        covered = weighted_distance(w, duel.w_proj, duel.V) <= radius_conf
        records.append(RoundRecord(duel.t, seed, duel.pair, duel.trajectories, duel.outcome,
                                   score_regret_increment(s_star, scores[i], scores[j]),
                                   preference_regret_increment(s_star, scores[i], scores[j]),
                                   duel.radius, duel.set_size, covered))
    return SeedRun(seed, records, audit_run(learner, records, scores, cfg))


def audit_run(learner, records: list, scores: np.ndarray, cfg: KnownModelConfig) -> dict:
    """Per-run invariant checks."""
    st = learner.state
    d, base = cfg.d, cfg.kappa * cfg.lam
    checks = {}
    V_log = data_matrix_from(st.dataset.z, base, d).matrix
    checks["V_recomputes"] = bool(np.allclose(st.V.matrix, V_log, rtol=0, atol=1e-9))
    other = st.Vbar if hasattr(st, "Vbar") else st.Vtilde
    diffs = st.policy_diffs if hasattr(st, "policy_diffs") else st.model_diffs
    checks["policy_matrix_recomputes"] = bool(np.allclose(
        other.matrix, data_matrix_from(np.asarray(diffs).reshape(-1, d), base, d).matrix,
        rtol=0, atol=1e-9))
    s_star = scores.max()
    inc = np.array([r.regret_scr for r in records])
    recomputed = np.array([(2 * s_star - scores[r.pair[0]] - scores[r.pair[1]]) / 2 for r in records])
    checks["score_regret_nonnegative"] = bool(np.all(inc >= -1e-12))
    checks["score_regret_matches_log"] = bool(np.allclose(inc, recomputed, rtol=0, atol=1e-12))
    pref = np.array([r.regret_pref for r in records])
    checks["pref_regret_in_range"] = bool(np.all((pref >= -0.5) & (pref <= 0.5)))
    return checks


def run_experiment(config: ExperimentConfig, out_dir=None, algorithm: str | None = None,
                   seeds: list | None = None, write: bool = True):
    """Run every seed, aggregate, and write ``curve.csv``/``summary.json`` (+ ``curve.svg``)."""
    from .io import write_curve_csv, write_summary
    from .plotting import plot_curve

    algo = algorithm or config.algorithm
    seeds = list(config.seeds if seeds is None else seeds)
    inst = config.instance
    cfg = config.learner_config()
    scores = inst.policy_scores()
    runs = [run_seed(inst, algo, cfg, config.T, s, scores=scores) for s in seeds]
    curve = RegretCurve.from_runs(runs, config.T)
    summary = summarize(config, algo, cfg, curve, runs, scores)
    if write:
        out = Path(out_dir or config.output)
        out.mkdir(parents=True, exist_ok=True)
        write_curve_csv(curve, out / "curve.csv")
        write_summary(summary, out / "summary.json")
        if config.plot and config.T > 0:
            plot_curve(curve, out / "curve.svg", title=f"{algo} model")
    return curve, summary


def summarize(config: ExperimentConfig, algo: str, cfg: KnownModelConfig, curve: RegretCurve,
              runs: list, scores: np.ndarray) -> dict:
    from .regret import sublinearity_metric

    checks = {}
    for run in runs:
        for name, ok in run.checks.items():
            checks[name] = checks.get(name, True) and ok
    if curve.T:
        checks["score_regret_nondecreasing"] = bool(np.all(np.diff(curve.cum_scr, axis=1) >= -1e-12))
    rep = regret_checks(scores, cfg.S, cfg.B, curve.cum_scr, curve.cum_pref)
    checks["argmax_agreement"] = rep.argmax_ok
    if rep.sandwich_applicable:
        checks["regret_sandwich"] = rep.sandwich_violations == 0
    final = {}
    if curve.T:
        for which in ("scr", "pref"):
            final[which] = {"mean": float(curve.mean(which)[-1]),
                            "stderr": float(curve.stderr(which)[-1]),
                            "median": float(curve.median(which)[-1])}
    slope = None
    if curve.T >= 8 and np.any(curve.mean("scr") > 0):
        try:
            slope = sublinearity_metric(curve.mean("scr"))
        except ValueError:
            slope = None
    return {
        "schema": SCHEMA_VERSION,
        "algorithm": algo,
        "T": curve.T,
        "seeds": list(curve.seeds),
        "constants": {"lambda": cfg.lam, "delta": cfg.delta, "S": cfg.S, "B": cfg.B, "d": cfg.d,
                      "kappa": cfg.kappa},
        "best_policy": int(np.argmax(scores)),
        "final_regret": final,
        "sublinearity_slope": slope,
        "checks": checks,
        "notes": rep.notes(),
        "all_checks_passed": all(checks.values()),
    }


def instance_checks(config: ExperimentConfig) -> dict:
    """Invariant suite that needs no learning run."""
    from .features import policy_features_in_model
    from .mdp import enumerate_trajectories, occupancy_measures
    from .features import trajectory_features

    inst = config.instance
    mdp, fmap = inst.mdp, inst.fmap
    checks = {}
    try:
        validate_mdp(mdp)
        checks["mdp_valid"] = True
    except ValueError:
        checks["mdp_valid"] = False
    B = feature_bound(fmap, mdp)
    max_norm, agree, mass, occ_ok = 0.0, True, True, True
    for p in inst.policies:
        enum = enumerate_trajectories(mdp, p)
        mass &= abs(sum(q for _, q in enum) - 1.0) <= 1e-9
        for traj, _ in enum:
            max_norm = max(max_norm, float(np.linalg.norm(trajectory_features(fmap, traj))))
        if p.is_markov:
            d = occupancy_measures(mdp, p)
            occ_ok &= bool(np.allclose(d.sum(axis=(1, 2)), 1.0, atol=1e-9))
            by_enum = np.zeros(fmap.dim)
            for traj, q in enum:
                by_enum += q * trajectory_features(fmap, traj)
            agree &= bool(np.allclose(policy_features_in_model(fmap, mdp.transitions, mdp.initial_dist, p,
                                                                mdp.horizon), by_enum, atol=1e-9))
    checks["enumeration_mass"] = bool(mass)
    checks["occupancy_mass"] = bool(occ_ok)
    checks["embedding_paths_agree"] = bool(agree)
    checks["feature_bound"] = max_norm <= B + 1e-12
    cfg_ok = True
    try:
        config.learner_config()
    except ValueError:
        cfg_ok = False
    checks["learner_config_valid"] = cfg_ok
    scores = inst.policy_scores()
    checks["score_bound"] = bool(np.all(np.abs(scores) <= inst.model.param_bound * B + 1e-12))
    rep = regret_checks(scores, inst.model.param_bound, B)
    checks["argmax_agreement"] = rep.argmax_ok
    return checks
