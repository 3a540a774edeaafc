"""Acceptance suite: one test per release criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The lower-bound scaling criterion is a known red; see the analysis in
the repository notes referenced by the README.
"""

import numpy as np
import pytest

from qufur.env import DomainSpec, lower_bound_stream, synthetic_stream
from qufur.harness import (
    logdet_domain_bounds,
    run_episode,
    sweep,
    write_sweep_csv,
)
from qufur.kernel import (
    effective_dimension,
    kernel_absorb,
    kernel_init,
    kernel_predict,
    kernel_uncertainty,
    make_kernel,
)
from qufur.linalg import absorb, init_state, quad_form
from qufur.nonlinear import (
    HypothesisTable,
    NonlinearQufurPolicy,
    beta_threshold,
    confidence_set,
    eluder_dimension,
    erm,
)
from qufur.env import table_stream
from qufur.policy import (
    FixedBudgetPolicy,
    GreedyPolicy,
    OraclePolicy,
    PolicyConfig,
    QufurPolicy,
    UniformPolicy,
    predict,
    uncertainty,
)
from qufur.rng import EpisodeRng, hash64

ETA_SYNTH = float(np.sqrt(0.1))


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_sherman_morrison_consistency():
    rng = np.random.default_rng(2024)
    dim = 8
    state = init_state(dim, 1.0)
    xs = []
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=dim)
        x /= np.linalg.norm(x)
        xs.append(x)
        state = absorb(state, x, rng.normal())
        direct = np.linalg.inv(state.lam * np.eye(dim) + np.sum([np.outer(v, v) for v in xs], axis=0))
        worst = max(worst, float(np.max(np.abs(state.gram_inv - direct))))
    _report("sherman-morrison-consistency", worst <= 1e-8, f"max abs err {worst:.2e}")


def test_kernel_primal_equivalence():
    spec = DomainSpec(entries=((3, 100), (2, 100), (4, 100), (2, 100), (3, 100)))
    gt, rounds = synthetic_stream(spec, 14, ETA_SYNTH, hash64(0, "env", 0))
    assert len(rounds) == 500
    cfg = PolicyConfig(alpha=1.0, noise_level=ETA_SYNTH, horizon=len(rounds))
    primal = init_state(14, cfg.norm_bound_C)
    dual = kernel_init(make_kernel("linear"), cfg.norm_bound_C, 14)
    rng = EpisodeRng(hash64(0, "kernel-primal", 0))
    worst_pred = worst_delta = 0.0
    for r in rounds:
        p_pred = predict(primal, r.x)
        p_delta = uncertainty(primal, r.x, cfg.noise_level)
        k_pred = kernel_predict(dual, r.x)
        k_delta = kernel_uncertainty(dual, r.x, cfg.noise_level)
        worst_pred = max(worst_pred, abs(p_pred - k_pred))
        worst_delta = max(worst_delta, abs(p_delta - k_delta))
        if rng.uniform() < min(1.0, cfg.alpha * p_delta):  # shared query decisions
            primal = absorb(primal, r.x, r.y)
            dual = kernel_absorb(dual, r.x, r.y)
    ok = worst_pred <= 1e-6 and worst_delta <= 1e-6
    _report("kernel-primal-equivalence", ok,
            f"max pred gap {worst_pred:.2e}, max delta gap {worst_delta:.2e}")


def test_hard_budget_never_exceeded():
    spec = DomainSpec(entries=tuple([(2, 100)] * 5))
    episodes = 0
    violations = 0
    for seed_index in range(334):
        gt, rounds = synthetic_stream(spec, 10, ETA_SYNTH, hash64(0, "env", seed_index))
        for budget in (10, 50, 200):
            cfg = PolicyConfig(noise_level=ETA_SYNTH, budget=budget, horizon=len(rounds))
            log = run_episode(rounds, gt, FixedBudgetPolicy(cfg, 10), cfg,
                              seed=hash64(0, "fixed_budget", float(budget), seed_index))
            episodes += 1
            if log.queries > budget:
                violations += 1
    _report("hard-budget", violations == 0 and episodes == 1002,
            f"{episodes} episodes, {violations} violations")


def test_logdet_invariant():
    """End-of-round snapshots satisfy the log-det bound verbatim; decision-time
    sums satisfy it with the elliptical-potential factor two."""
    checks = 0
    violations = 0

    def check(rounds, log, c):
        nonlocal checks, violations
        for _, lhs_dec, lhs_snap, rhs in logdet_domain_bounds(rounds, log, c):
            checks += 1
            if lhs_snap > rhs + 1e-12 or lhs_dec > 2.0 * rhs + 1e-12:
                violations += 1

    spec = DomainSpec(entries=((3, 80), (2, 80), (4, 80)))
    for seed_index in range(6):
        gt, rounds = synthetic_stream(spec, 9, ETA_SYNTH, hash64(0, "env", seed_index))
        horizon = len(rounds)
        domains = [(3, 80), (2, 80), (4, 80)]
        schedule = [r.domain_id for r in rounds]
        policies = [
            QufurPolicy(PolicyConfig(alpha=a, noise_level=ETA_SYNTH, horizon=horizon), 9)
            for a in (0.25, 1.0, 4.0)
        ] + [
            FixedBudgetPolicy(PolicyConfig(noise_level=ETA_SYNTH, budget=40, horizon=horizon), 9),
            UniformPolicy(PolicyConfig(noise_level=ETA_SYNTH, horizon=horizon), 9, 0.3),
            GreedyPolicy(PolicyConfig(noise_level=ETA_SYNTH, budget=60, horizon=horizon), 9),
            OraclePolicy(PolicyConfig(noise_level=ETA_SYNTH, budget=60, horizon=horizon), 9,
                         domains, schedule, 60),
        ]
        for policy in policies:
            log = run_episode(rounds, gt, policy, policy.cfg,
                              seed=hash64(1, policy.name, seed_index))
            check(rounds, log, policy.cfg.norm_bound_C)

    lb_spec = DomainSpec(entries=((2, 60), (3, 90)))
    for seed_index in range(6):
        gt, rounds = lower_bound_stream(lb_spec, hash64(0, "lb", seed_index))
        c = float(np.sqrt(5))
        cfg = PolicyConfig(noise_level=1.0, norm_bound_C=c, budget=30, horizon=len(rounds))
        log = run_episode(rounds, gt, FixedBudgetPolicy(cfg, 5), cfg,
                          seed=hash64(1, "fb-lb", seed_index))
        check(rounds, log, c)

    _report("logdet-invariant", violations == 0 and checks > 0,
            f"{checks} per-domain checks, {violations} violations")


DOMINANCE_SPEC = DomainSpec(
    entries=((6, 350), (6, 350), (6, 350), (4, 150), (4, 150), (4, 150)))
DOMINANCE_ALPHAS = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0]
DOMINANCE_MUS = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0]


def test_tradeoff_dominance():
    seeds = 5
    envs = [synthetic_stream(DOMINANCE_SPEC, 30, ETA_SYNTH, hash64(0, "env", i))
            for i in range(seeds)]
    horizon = 1500
    assert all(len(r) == horizon for _, r in envs)

    def run(kind, values):
        curves = {}
        for v in values:
            rows = []
            for i, (gt, rounds) in enumerate(envs):
                cfg = PolicyConfig(alpha=v if kind == "qufur" else 0.0,
                                   noise_level=ETA_SYNTH, horizon=horizon)
                policy = QufurPolicy(cfg, 30) if kind == "qufur" else UniformPolicy(cfg, 30, v)
                log = run_episode(rounds, gt, policy, cfg, seed=hash64(0, kind, float(v), i))
                rows.append((log.queries, log.regret_R))
            curves[v] = rows
        return curves

    quf = run("qufur", DOMINANCE_ALPHAS)
    uni = run("uniform", DOMINANCE_MUS)
    quf_mean = {a: (np.mean([q for q, _ in quf[a]]), np.mean([r for _, r in quf[a]]))
                for a in DOMINANCE_ALPHAS}
    uni_pts = sorted((np.mean([q for q, _ in uni[m]]), np.mean([r for _, r in uni[m]]))
                     for m in DOMINANCE_MUS)
    uni_q = [q for q, _ in uni_pts]
    uni_r = [r for _, r in uni_pts]

    interior = []
    for a, (q, r) in quf_mean.items():
        if uni_q[0] < q < uni_q[-1]:
            interior.append((a, q, r, float(np.interp(q, uni_q, uni_r))))
    dominated = [pt for pt in interior if pt[2] <= pt[3]]

    seed_wins = 0
    for i in range(seeds):
        pts = sorted((uni[m][i][0], uni[m][i][1]) for m in DOMINANCE_MUS)
        qs = [q for q, _ in pts]
        rs = [r for _, r in pts]
        gaps = []
        for a, _, _, _ in interior:
            q_i, r_i = quf[a][i]
            if qs[0] < q_i < qs[-1]:
                gaps.append(float(np.interp(q_i, qs, rs)) - r_i)
        if gaps and np.mean(gaps) > 0:
            seed_wins += 1

    ok = len(dominated) >= 3 and seed_wins >= 4
    _report("tradeoff-dominance", ok,
            f"{len(dominated)}/{len(interior)} interior points dominated, "
            f"qufur lower R in {seed_wins}/5 seeds")


def test_heterogeneous_domain_advantage():
    spec = DomainSpec(entries=((20, 20), (1, 1000)))
    budget = 60
    fb_regrets, uni_regrets = [], []
    for seed_index in range(10):
        gt, rounds = synthetic_stream(spec, 21, ETA_SYNTH, hash64(0, "env", seed_index))
        cfg = PolicyConfig(noise_level=ETA_SYNTH, budget=budget, horizon=len(rounds))
        log_fb = run_episode(rounds, gt, FixedBudgetPolicy(cfg, 21), cfg,
                             seed=hash64(0, "fixed_budget", float(budget), seed_index))
        log_uni = run_episode(rounds, gt, UniformPolicy(cfg, 21, budget / len(rounds)), cfg,
                              seed=hash64(0, "uniform", float(budget), seed_index))
        assert log_fb.queries <= budget and log_uni.queries <= budget
        fb_regrets.append(log_fb.regret_R)
        uni_regrets.append(log_uni.regret_R)
    ratio = float(np.mean(uni_regrets) / np.mean(fb_regrets))
    _report("heterogeneous-domain-advantage", ratio >= 2.0,
            f"uniform/fixed-budget mean regret ratio {ratio:.2f} over 10 seeds")


def test_lower_bound_scaling():
    spec = DomainSpec(entries=((2, 100), (4, 400)))
    budgets = [16, 32, 64, 128]
    dim = spec.total_dim
    means = []
    for budget in budgets:
        regrets = []
        for seed_index in range(20):
            gt, rounds = lower_bound_stream(spec, hash64(0, "env", seed_index))
            cfg = PolicyConfig(noise_level=1.0, norm_bound_C=float(np.sqrt(dim)),
                               budget=budget, horizon=len(rounds))
            log = run_episode(rounds, gt, FixedBudgetPolicy(cfg, dim), cfg,
                              seed=hash64(0, "fixed_budget", float(budget), seed_index))
            regrets.append(log.regret_R)
        means.append(float(np.mean(regrets)))
    slope = float(np.polyfit(np.log(budgets), np.log(means), 1)[0])
    _report("lower-bound-scaling", -1.3 <= slope <= -0.7,
            f"slope {slope:.3f}, mean regrets {[round(m, 1) for m in means]}")


def test_regret_equivalence():
    spec = DomainSpec(entries=((2, 80), (2, 80), (1, 80)))
    rs, regs = [], []
    for seed_index in range(200):
        gt, rounds = synthetic_stream(spec, 5, 0.3, hash64(0, "env", seed_index))
        cfg = PolicyConfig(alpha=0.5, noise_level=0.3, horizon=len(rounds))
        log = run_episode(rounds, gt, QufurPolicy(cfg, 5), cfg,
                          seed=hash64(0, "qufur", 0.5, seed_index))
        rs.append(log.regret_R)
        regs.append(log.regret_Reg)
    gap = abs(float(np.mean(rs)) - float(np.mean(regs)))
    bound = 3.0 * float(np.sqrt(np.var(rs, ddof=1) / 200 + np.var(regs, ddof=1) / 200))
    _report("regret-equivalence", gap <= bound, f"|mean R - mean Reg| {gap:.4f} <= {bound:.4f}")


def test_confidence_set_coverage():
    inside = total = 0
    for seed_index in range(100):
        table_rng = np.random.default_rng(hash64(0, "table", seed_index))
        table = HypothesisTable(
            support=list(range(8)),
            values=table_rng.uniform(-1, 1, size=(16, 8)),
            truth_index=int(table_rng.integers(16)),
        )
        gt, rounds = table_stream(table, horizon=200, eta=0.2,
                                  seed=hash64(0, "env", seed_index))
        cfg = PolicyConfig(alpha=1.0, noise_level=0.2, horizon=200, delta=0.1)
        policy = NonlinearQufurPolicy(cfg, table)
        policy.begin(EpisodeRng(hash64(0, "nonlinear", seed_index)))
        for r in rounds:
            decision = policy.decide(r.t, r.x)
            center = erm(table, policy.labeled)
            beta = beta_threshold(len(policy.labeled), cfg.horizon, cfg.noise_level,
                                  cfg.delta, policy.cover_size)
            cset = confidence_set(table, center, policy.labeled, beta)
            inside += int(table.truth_index in cset.member_indices)
            total += 1
            if decision.queried:
                policy.observe(r.t, r.x, r.y)
    rate = inside / total
    _report("confidence-set-coverage", rate >= 0.9,
            f"truth covered in {rate:.4f} of {total} (seed, round) pairs")


def test_eluder_oracle_examples():
    two_constants = HypothesisTable(support=["a"], values=np.array([[0.0], [1.0]]))
    d1 = eluder_dimension(two_constants, ["a"], 0.5)

    singleton = HypothesisTable(support=["a", "b"], values=np.array([[0.3, -0.3]]))
    d2 = eluder_dimension(singleton, ["a", "b"], 0.5)

    thetas = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    linear = HypothesisTable(support=["e1", "e2"],
                             values=np.array([[a, b] for a, b in thetas], dtype=float))
    d3 = eluder_dimension(linear, ["e1", "e2"], 0.1)

    _report("eluder-oracle", (d1, d2, d3) == (1, 0, 2), f"got {(d1, d2, d3)}, want (1, 0, 2)")


def test_effective_dimension_example():
    value = effective_dimension([4.0, 4.0, 1.0, 1.0], 1.0, 8)
    _report("effective-dimension", value == 2, f"got {value}, want 2")


def test_sweep_determinism(tmp_path):
    config = {
        "environment": {"kind": "synthetic", "domains": [[2, 40], [1, 20]],
                        "ambient_dim": 3, "eta": 0.2},
        "policy": [{"kind": "qufur", "alpha": [0.25, 1.0]}, {"kind": "uniform", "mu": 0.3}],
        "seeds": 3,
        "cost_c": 1.0,
    }
    paths = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        write_sweep_csv(sweep(config), path)
        paths.append(path)
    lines = [p.read_text().splitlines() for p in paths]
    ok = (lines[0][0].startswith("# generated") and lines[1][0].startswith("# generated")
          and lines[0][1:] == lines[1][1:])
    _report("determinism", ok, f"{len(lines[0]) - 1} CSV lines identical modulo timestamp header")
