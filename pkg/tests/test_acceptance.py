"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below."""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import binomtest

from prefrl.environment import Environment, make_rng
from prefrl.estimation import (
    DuelDataset,
    g_jacobian,
    g_transform,
    log_likelihood,
    log_likelihood_grad,
    mle_fit,
    project_estimate,
    projection_objective,
)
from prefrl.experiment import ExperimentConfig, RegretCurve, instance_to_dict, run_experiment, run_seed
from prefrl.features import class_marginals
from prefrl.instances import random_instance
from prefrl.io import read_curve_csv
from prefrl.known import KnownModelConfig, KnownModelLearner
from prefrl.oracle import sigmoid
from prefrl.regret import regret_checks, sublinearity_metric
from prefrl.unknown import UnknownModelLearner, bonus_expectation, bonus_vector, xi_eps, xi_hat

from conftest import mc_rollouts
from test_estimation import central_jacobian, grid_projection_optimum, projection_case, random_data

pytestmark = pytest.mark.slow

MLE_TOL = 1e-8
GRID_GAP = 1e-3
GRAD_REL = 1e-6
COVERAGE = 0.9
BINOM_LEVEL = 0.01
OPT_SLACK = 0.05
LEMMA45_FREQ = 0.1
KNOWN_SLOPE, UNKNOWN_SLOPE = 0.75, 0.85
KNOWN_SE, UNKNOWN_SE = 3.0, 2.0


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail, started, budget):
        elapsed = time.perf_counter() - started
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {name}: {detail} "
                  f"(runtime {elapsed:.1f}s, budget {budget:.0f}s)")
        assert ok, f"criterion {n} failed: {detail}"
    return emit


def learner_cfg(inst, T, delta):
    return KnownModelConfig.for_instance(inst.fmap, inst.mdp.horizon, inst.model.param_bound, T, delta)


def test_criterion_01_estimation_oracles(report):
    t0 = time.perf_counter()
    root = brentq(lambda w: 1.0 - float(sigmoid(w)) - w, 0.0, 1.0, xtol=1e-14, rtol=1e-15)
    mle_err = abs(mle_fit(DuelDataset.from_arrays([[1.0]], [1]), 1.0)[0] - root)
    worst = -math.inf
    for seed in range(50):
        w_hat, data, V, lam, S = projection_case(seed)
        w = project_estimate(w_hat, data, V, lam, S)
        f = projection_objective(w, g_transform(w_hat, data, lam), data, V, lam)
        worst = max(worst, f - grid_projection_optimum(w_hat, data, V, lam, S))
    ok = mle_err <= MLE_TOL and worst <= GRID_GAP
    report(1, "estimation oracles", ok,
           f"|mle - bisection| = {mle_err:.1e}, worst projection gap over grid = {worst:.1e}", t0, 60)


def test_criterion_02_gradient_checks(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_ll = worst_g = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 6))
        data = random_data(rng, int(rng.integers(1, 30)), d)
        lam = float(rng.uniform(0.1, 3.0))
        w = rng.normal(size=d)
        num = central_jacobian(lambda v: np.array([log_likelihood(v, data, lam)]), w)[0]
        ana = log_likelihood_grad(w, data, lam)
        worst_ll = max(worst_ll, np.linalg.norm(num - ana) / max(np.linalg.norm(ana), 1.0))
        num = central_jacobian(lambda v: g_transform(v, data, lam), w)
        ana = g_jacobian(w, data, lam)
        worst_g = max(worst_g, np.linalg.norm(num - ana) / np.linalg.norm(ana))
    report(2, "gradient checks", worst_ll <= GRAD_REL and worst_g <= GRAD_REL,
           f"worst relative error: likelihood {worst_ll:.1e}, g Jacobian {worst_g:.1e}", t0, 60)


def test_criterion_03_confidence_coverage(report):
    t0 = time.perf_counter()
    runs, T, delta = 500, 200, 0.1
    covered = 0
    for seed in range(runs):
        inst = random_instance(make_rng(30_000 + seed), dim=3)
        run = run_seed(inst, "known", learner_cfg(inst, T, delta), T, seed)
        covered += all(r.covered for r in run.records)
    p = binomtest(covered, runs, COVERAGE, alternative="less").pvalue
    report(3, "confidence coverage", p >= BINOM_LEVEL,
           f"w* in C_t for all t on {covered}/{runs} runs, one-sided p = {p:.3g}", t0, 600)


def test_criterion_04_optimism(report):
    t0 = time.perf_counter()
    runs, T, delta = 200, 200, 0.05
    misses = {"known": 0, "unknown": 0}
    for seed in range(runs):
        inst = random_instance(make_rng(40_000 + seed))
        star = int(np.argmax(inst.policy_scores()))
        cfg = learner_cfg(inst, T, delta)
        m = inst.mdp
        learners = {
            "known": KnownModelLearner(cfg, m, inst.fmap, inst.policies),
            "unknown": UnknownModelLearner(cfg, m.initial_dist, m.horizon, m.num_states,
                                           m.num_actions, inst.fmap, inst.policies),
        }
        for name, learner in learners.items():
            env = Environment(m, inst.fmap, inst.model, make_rng(seed))
            misses[name] += any(star not in learner.step(env).candidates for _ in range(T))
    fk, fu = misses["known"] / runs, misses["unknown"] / runs
    ok = fk <= delta + OPT_SLACK and fu <= 5 * delta + OPT_SLACK
    report(4, "optimism", ok, f"run-level violation frequency known {fk:.3f} (limit "
           f"{delta + OPT_SLACK:.2f}), unknown {fu:.3f} (limit {5 * delta + OPT_SLACK:.2f})", t0, 900)


def test_criterion_05_bonus_dp(report):
    t0 = time.perf_counter()
    rng = make_rng(5)
    n = 100_000
    worst_z = 0.0
    for k in range(20):
        inst = random_instance(make_rng(50_000 + k))
        m = inst.mdp
        N = rng.integers(0, 50, size=(m.num_states, m.num_actions))
        xi = xi_hat(N, 2.0, 0.1, m.horizon, m.num_states, m.num_actions)
        pol = inst.policies[k % len(inst.policies)]
        exact = bonus_expectation(m.transitions, m.initial_dist, pol, xi, m.horizon)
        states, acts = mc_rollouts(m.initial_dist, m.transitions, pol.actions, n, rng)
        samples = xi[states[:, :-1], acts[:, :-1]].sum(axis=1)
        se = samples.std(ddof=1) / math.sqrt(n)
        worst_z = max(worst_z, abs(samples.mean() - exact) / se if se > 0 else 0.0)
    h1 = random_instance(make_rng(5), horizon=1)
    zero = bonus_expectation(h1.mdp.transitions, h1.mdp.initial_dist, h1.policies[0],
                             np.ones((3, 2)), 1)
    report(5, "bonus DP", worst_z <= 3.0 and zero == 0.0,
           f"worst |MC - DP| = {worst_z:.2f} standard errors, H=1 value {zero}", t0, 300)


def test_criterion_06_bonus_ordering(report):
    t0 = time.perf_counter()
    runs, T, delta = 200, 200, 0.1
    eps = 1.0 / T
    bad = total = 0
    for seed in range(runs):
        inst = random_instance(make_rng(40_000 + seed))
        m = inst.mdp
        cfg = learner_cfg(inst, T, delta)
        eta = 2 * cfg.S * cfg.B
        H, nS, nA = m.horizon, m.num_states, m.num_actions
        learner = UnknownModelLearner(cfg, m.initial_dist, H, nS, nA, inst.fmap, inst.policies)
        env = Environment(m, inst.fmap, inst.model, make_rng(seed))
        true_marg = class_marginals(m.transitions, m.initial_dist, inst.policies, H)
        for _ in range(T):
            N = learner.state.counts.N
            hat = bonus_vector(class_marginals(learner.model(), m.initial_dist, inst.policies, H),
                               xi_hat(N, eta, delta, H, nS, nA))
            true = bonus_vector(true_marg, xi_eps(N, eps, 2 * H * eta, delta, H, nS, nA))
            bad += bool(np.any(hat > 2 * true + eps))
            total += 1
            learner.step(env)
    freq = bad / total
    report(6, "bonus ordering", freq <= LEMMA45_FREQ,
           f"per-round violation frequency {freq:.4f} over {total} rounds", t0, 600)


def test_criterion_07_regret_sublinearity(report):
    t0 = time.perf_counter()
    T, seeds, delta = 2000, list(range(20)), 0.1
    inst = random_instance(make_rng(7))
    cfg = learner_cfg(inst, T, delta)
    scores = inst.policy_scores()
    curves = {a: RegretCurve.from_runs([run_seed(inst, a, cfg, T, s, scores=scores) for s in seeds], T)
              for a in ("known", "unknown", "baseline")}
    base = curves["baseline"]
    parts, ok = [], True
    for algo, slope_lim, se_lim in (("known", KNOWN_SLOPE, KNOWN_SE), ("unknown", UNKNOWN_SLOPE, UNKNOWN_SE)):
        c = curves[algo]
        slope = sublinearity_metric(c.mean())
        se = math.hypot(c.stderr()[-1], base.stderr()[-1])
        margin = (base.mean()[-1] - c.mean()[-1]) / se if se > 0 else 0.0
        ok &= slope <= slope_lim and margin >= se_lim
        parts.append(f"{algo}: slope {slope:.3f} (limit {slope_lim}), R_T {c.mean()[-1]:.1f} vs "
                     f"baseline {base.mean()[-1]:.1f} = {margin:.2f} SE (need {se_lim})")
    report(7, "regret sublinearity", ok, "; ".join(parts), t0, 1800)


def test_criterion_08_regret_sandwich(report):
    t0 = time.perf_counter()
    T = 500
    violations, checked = 0, 0
    for k in range(20):
        inst = random_instance(make_rng(80_000 + k), param_bound=0.9, step_norm=0.3)
        cfg = learner_cfg(inst, T, 0.1)
        assert cfg.S * cfg.B < 1
        run = run_seed(inst, "known", cfg, T, k)
        r = np.cumsum([x.regret_scr for x in run.records])
        p = np.cumsum([x.regret_pref for x in run.records])
        rep = regret_checks(inst.policy_scores(), cfg.S, cfg.B, r, p)
        violations += rep.sandwich_violations
        checked += T
    report(8, "regret sandwich", violations == 0,
           f"{violations} violations over {checked} prefixes on 20 instances", t0, 300)


def test_criterion_09_cross_module_equivalence(report):
    t0 = time.perf_counter()
    T = 200
    inst = random_instance(make_rng(9))
    cfg = learner_cfg(inst, T, 0.1)
    m = inst.mdp
    mismatched = 0
    for seed in range(10):
        kn = KnownModelLearner(cfg, m, inst.fmap, inst.policies)
        un = UnknownModelLearner(cfg, m.initial_dist, m.horizon, m.num_states, m.num_actions,
                                 inst.fmap, inst.policies, frozen_model=m.transitions, zero_bonus=True)
        e1 = Environment(m, inst.fmap, inst.model, make_rng(seed))
        e2 = Environment(m, inst.fmap, inst.model, make_rng(seed))
        for _ in range(T):
            a, b = kn.step(e1), un.step(e2)
            if (a.pair, a.trajectories, a.outcome) != (b.pair, b.trajectories, b.outcome):
                mismatched += 1
                break
    report(9, "cross-module equivalence", mismatched == 0,
           f"{10 - mismatched}/10 seeds replayed {T} rounds identically", t0, 120)


def test_criterion_10_determinism_and_io(report, tmp_path):
    t0 = time.perf_counter()
    raw = instance_to_dict(random_instance(make_rng(10)))
    raw.update({"T": 100, "seeds": [0, 1, 2], "delta": 0.1})
    results = {}
    for algo in ("known", "unknown"):
        cfg = ExperimentConfig.from_dict(raw)
        a, _ = run_experiment(cfg, out_dir=tmp_path / f"{algo}a", algorithm=algo)
        run_experiment(cfg, out_dir=tmp_path / f"{algo}b", algorithm=algo)
        same = (tmp_path / f"{algo}a/curve.csv").read_bytes() == (tmp_path / f"{algo}b/curve.csv").read_bytes()
        back = read_curve_csv(tmp_path / f"{algo}a/curve.csv").equals(a)
        results[algo] = (same, back)
    ok = all(s and b for s, b in results.values())
    detail = ", ".join(f"{k}: byte-identical={s}, round-trip={b}" for k, (s, b) in results.items())
    report(10, "determinism and I/O", ok, detail, t0, 60)
