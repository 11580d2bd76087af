"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Formula tests compare the implementation against an independently written
high-precision evaluator (mpmath, 30 significant digits).  Desk-scale
statistical criteria run the synthetic lab at its default configuration:
n_train=2000, n_test=20000, K=4, delta=0.05, the five stock seeds, and a
seven-policy grid (six entropy thresholds plus fixed full depth).
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from mpmath import mp, mpf
from mpmath import ceil as mpceil
from mpmath import log as mplog
from mpmath import sqrt as mpsqrt

import exitbound as eb
from exitbound.cli import main as cli_main
from exitbound.lab import (
    SyntheticSpec,
    default_policy_grid,
    default_tau_grid,
    emit_trace,
    gap_ordering,
    generate_dataset,
    gradient_check,
    run_experiment,
    train_model,
)
from exitbound.lab.net import MultiExitNet

mp.dps = 30

DELTA = 0.05
K_LAB = 4


def report(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}: {detail}")
    assert ok, f"{name} failed: {detail}"


# ---------------------------------------------------------------------------
# independent high-precision oracles
# ---------------------------------------------------------------------------


def o_conf(n, delta):
    return mplog(2 * mpsqrt(mpf(n)) / mpf(delta))


def o_main(L, kl, H, n, delta):
    return float(mpf(L) + mpsqrt((mpf(kl) + mpf(H) + o_conf(n, delta)) / (2 * mpf(n))))


def o_det(L, H, n, delta):
    return float(mpf(L) + mpsqrt((mpf(H) + o_conf(n, delta)) / (2 * mpf(n))))


def o_weighted(L, p, n_k, kls, K, delta):
    total = mpf(L)
    for pk, nk, kl in zip(p, n_k, kls):
        pk, nk, kl = float(pk), int(nk), float(kl)
        if pk == 0.0:
            continue
        total += mpf(pk) * mpsqrt(
            (mpf(kl) + mplog(2 * mpf(K) * mpsqrt(mpf(nk)) / mpf(delta))) / (2 * mpf(nk))
        )
    return float(total)


def o_explicit(L, H, n, K, delta):
    h_bits = mpf(H) / mplog(2)
    ent = mpsqrt(2 * mplog(2) / mpf(n)) * mpsqrt(h_bits)
    comp = mpsqrt((mplog(mpf(K)) + o_conf(n, delta)) / (2 * mpf(n)))
    return float(mpf(L) + ent + comp)


def o_eps(L, kl, H, n, delta, eps, K):
    return float(mpf(o_main(L, kl, H, n, delta)) + mpf(eps) * K)


def o_advantage(alpha, K, k_easy, d, n, c):
    scale = mpsqrt(mpf(d) / mpf(n))
    return (
        float(mpf(c) * mpf(alpha) * (mpsqrt(mpf(K)) - mpsqrt(mpf(k_easy))) * scale),
        float(
            mpf(alpha) * mpf(c) * mpsqrt(mpf(k_easy)) * scale
            + (1 - mpf(alpha)) * mpf(c) * mpsqrt(mpf(K)) * scale
        ),
    )


def o_sample(E, d, H, delta, eps, c, K):
    num = mpf(c) * (mpf(E) * mpf(d) + mpf(H) + mplog(1 / mpf(delta)))
    return (
        int(mpceil(num / mpf(eps) ** 2)),
        int(mpceil(mpf(c) * mpf(K) * mpf(d) / mpf(eps) ** 2)),
    )


def o_gauss(msn, dim, pv, qv):
    pv, qv = mpf(pv), mpf(qv)
    return float(
        mpf(0.5) * (dim * qv / pv + mpf(msn) / pv - dim + dim * mplog(pv / qv))
    )


def rel_err(got, want):
    return abs(got - want) / max(abs(want), 1e-300)


# ---------------------------------------------------------------------------
# shared desk-scale experiment (runs once per module)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def lab_experiment():
    spec = SyntheticSpec()
    assert spec.n_train == 2000 and spec.n_test == 20000
    start = time.time()
    result = run_experiment(
        spec, K_LAB, default_policy_grid(K_LAB, spec.C), DELTA
    )
    return result, time.time() - start


@pytest.fixture(scope="module")
def parity_runs():
    """Per-seed bound-guided versus validation-tuned threshold choices."""
    spec = SyntheticSpec()
    taus = default_tau_grid(spec.C)
    deltas = []
    for seed in (42, 123, 456, 789, 1024):
        data = generate_dataset(replace(spec, seed=seed))
        val_data = generate_dataset(replace(spec, seed=seed + 50000))
        net = train_model(data.train, K_LAB, (10, 48, 48, 48), 350, 0.12, seed)
        train_trace = emit_trace(net, data.train, "train", loss_kind="zero-one")
        val_trace = emit_trace(net, val_data.train, "validation", loss_kind="zero-one")
        test_trace = emit_trace(net, data.test, "test", loss_kind="zero-one")
        cmp = eb.compare_with_validation(
            train_trace, val_trace, test_trace, "entropy-threshold", taus, DELTA, K_LAB
        )
        deltas.append(cmp.test_accuracy_delta)
    return deltas


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_formula_oracle_equivalence():
    rng = np.random.default_rng(20240501)
    start = time.time()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(10, 10**6))
        H = float(rng.uniform(0, 3))
        kl = float(rng.uniform(0, 5))
        delta = float(rng.uniform(0.01, 0.5))
        L = float(rng.uniform(0, 1))
        eps = float(rng.uniform(0, 0.3))
        K = int(rng.integers(2, 16))
        d = float(rng.uniform(1, 500))
        k_easy = int(rng.integers(1, K))
        alpha = float(rng.uniform(0, 1))
        c = float(rng.uniform(0.5, 3))
        target = float(rng.uniform(0.01, 0.5))
        E = float(rng.uniform(1, K))

        n_k = rng.integers(1, 2000, size=K)
        n_w = int(n_k.sum())
        p = n_k / n_w
        kls = rng.uniform(0, 2, size=K)

        inp = eb.BoundInputs(
            n=n, K=K, H_marginal=H, delta=delta, empirical_loss=L,
            kl_total=kl, epsilon=eps, expected_depth=E, d_eff=d,
            alpha=alpha, k_easy=k_easy, constant_c=c,
        )
        winp = eb.BoundInputs(
            n=n_w, K=K, H_marginal=H, delta=delta, empirical_loss=L,
            p=p, n_k=n_k, kl_per_depth=kls,
        )
        worst = max(worst, rel_err(eb.main_bound(inp), o_main(L, kl, H, n, delta)))
        worst = max(worst, rel_err(eb.deterministic_bound(inp), o_det(L, H, n, delta)))
        worst = max(
            worst,
            rel_err(eb.weighted_bound(winp), o_weighted(L, p, n_k, kls, K, delta)),
        )
        worst = max(
            worst, rel_err(eb.explicit_bound(inp).total, o_explicit(L, H, n, K, delta))
        )
        worst = max(
            worst, rel_err(eb.epsilon_bound(inp), o_eps(L, kl, H, n, delta, eps, K))
        )
        adv = eb.advantage(inp)
        o_adv, o_comp = o_advantage(alpha, K, k_easy, d, n, c)
        if alpha > 0:
            worst = max(worst, rel_err(adv.advantage, o_adv))
        worst = max(worst, rel_err(adv.composite_bound, o_comp))
        sc = eb.sample_complexity(inp, target)
        o_na, o_nf = o_sample(E, d, H, delta, target, inp.sc_constant, K)
        worst = max(worst, rel_err(sc.n_adaptive, o_na), rel_err(sc.n_fixed, o_nf))
        pv = float(rng.uniform(0.01, 2))
        qv = float(rng.uniform(0.01, 2))
        msn = float(rng.uniform(0, 10))
        dim = int(rng.integers(1, 100))
        worst = max(worst, rel_err(eb.gaussian_kl(msn, dim, pv, qv), o_gauss(msn, dim, pv, qv)))
    elapsed = time.time() - start
    report(
        "formula-oracle-equivalence",
        worst <= 1e-12 and elapsed < 5.0,
        f"worst rel err {worst:.2e} over 1000 tuples in {elapsed:.2f}s",
    )


def test_explicit_constant():
    coefficient = eb.ENTROPY_COEFFICIENT
    ok = abs(coefficient - 1.177410) <= 1e-6
    report("explicit-constant", ok, f"sqrt(2 ln 2) = {coefficient:.9f}")


def test_kl_entropy_identity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        K = int(rng.integers(2, 17))
        p = rng.dirichlet(np.ones(K) * float(rng.uniform(0.2, 3)))
        p = p / p.sum()
        kl = eb.depth_kl_identity(p, K)
        H = eb.predictive_entropy(p)
        worst = max(worst, abs(kl - (math.log(K) - H)))
    report("kl-entropy-identity", worst <= 1e-12, f"worst |KL - (ln K - H)| = {worst:.2e}")


def test_dominance_over_lnk_baseline():
    rng = np.random.default_rng(8)
    failures = 0
    checked = 0
    for _ in range(1000):
        K = int(rng.integers(2, 16))
        H = float(rng.uniform(0, math.log(K)))
        inp = eb.BoundInputs(
            n=int(rng.integers(10, 10**6)), K=K, H_marginal=H, delta=float(rng.uniform(0.01, 0.5)),
        )
        if H < math.log(K) - 1e-9:
            checked += 1
            if not eb.deterministic_bound(inp) < eb.naive_lnk_bound(inp):
                failures += 1
    report(
        "dominance",
        failures == 0,
        f"{checked} grid points with H < ln K - 1e-9, {failures} violations",
    )


def test_gradient_check():
    worst = 0.0
    for seed in (101, 202, 303):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(2, 4))
        widths = [int(w) for w in rng.integers(3, 6, size=K)]
        net = MultiExitNet(input_dim=4, widths=widths, C=3, seed=seed)
        X = rng.normal(size=(7, 4))
        y = rng.integers(1, 4, size=7)
        worst = max(worst, gradient_check(net, X, y))
    report("gradient-check", worst <= 1e-5, f"worst rel err {worst:.2e} over 3 nets")


def test_bound_validity_at_desk_scale(lab_experiment):
    result, elapsed = lab_experiment
    margins = [r.det_bound - r.test_loss for r in result.rows]
    ok = result.bound_validity_fraction == 1.0 and elapsed <= 900
    report(
        "bound-validity",
        ok,
        f"{sum(m >= 0 for m in margins)}/{len(margins)} runs valid, "
        f"min margin {min(margins):+.4f}, runtime {elapsed:.0f}s",
    )


def test_gap_entropy_correlation(lab_experiment):
    result, _ = lab_experiment
    report(
        "correlation",
        result.spearman_rho >= 0.8,
        f"spearman rho = {result.spearman_rho:.3f} across the threshold grid",
    )


def test_ablation_gap_ordering(lab_experiment):
    result, _ = lab_experiment
    ordering = gap_ordering(result)
    report(
        "ordering",
        ordering.holds_within_one_std,
        f"aggressive {ordering.aggressive:.4f} <= moderate {ordering.moderate:.4f} "
        f"<= conservative {ordering.conservative:.4f} <= fixed {ordering.fixed:.4f} "
        f"within pooled std {ordering.pooled_std:.4f}",
    )


def test_threshold_selection_parity(parity_runs):
    hits = sum(abs(d) <= 0.005 for d in parity_runs)
    report(
        "selection-parity",
        hits >= 4,
        f"{hits}/5 seeds within 0.5% ({['%+.4f' % d for d in parity_runs]})",
    )


def test_early_exit_advantage_sign(lab_experiment):
    result, _ = lab_experiment
    spec = result.spec
    assert spec.alpha == 0.5
    inp = eb.BoundInputs(
        n=spec.n_train, K=K_LAB, H_marginal=0.0, delta=DELTA,
        alpha=spec.alpha, k_easy=1, d_eff=float(spec.input_dim),
    )
    adv = eb.advantage(inp)
    composite_ok = adv.composite_bound < adv.full_depth_bound
    aggressive_label = f"entropy@{default_tau_grid(spec.C)[0]:g}"
    signs = 0
    for seed in result.seeds:
        gap_aggr = next(
            r.gap for r in result.rows if r.seed == seed and r.label == aggressive_label
        )
        gap_fixed = next(
            r.gap for r in result.rows if r.seed == seed and r.label == f"fixed@{K_LAB}"
        )
        signs += gap_fixed > gap_aggr
    report(
        "advantage-sign",
        composite_ok and signs >= 4,
        f"composite {adv.composite_bound:.4f} < B_K {adv.full_depth_bound:.4f}; "
        f"adaptive gap below fixed in {signs}/5 seeds",
    )


def test_epsilon_penalty_reproduction():
    penalty = eb.epsilon_penalty(0.02, 12)
    inp = eb.BoundInputs(n=1000, K=12, H_marginal=0.5, delta=DELTA, epsilon=0.02)
    diff = eb.epsilon_bound(inp) - eb.main_bound(inp)
    ok = penalty == 0.24 and abs(diff - 0.24) < 1e-15
    report("epsilon-penalty", ok, f"0.02 * 12 = {penalty!r}")


def test_cli_determinism(tmp_path):
    spec = SyntheticSpec(n_train=250, n_test=400)
    data = generate_dataset(replace(spec, seed=3))
    net = train_model(data.train, 3, (8, 16, 16), 25, 0.12, seed=3)
    trace_path = tmp_path / "fixture.trace"
    eb.write_trace(emit_trace(net, data.train, "train", loss_kind="zero-one"), trace_path)
    val_path = tmp_path / "val.trace"
    test_path = tmp_path / "test.trace"
    val_data = generate_dataset(replace(spec, seed=4))
    eb.write_trace(emit_trace(net, val_data.train, "validation", loss_kind="zero-one"), val_path)
    eb.write_trace(emit_trace(net, data.test, "test", loss_kind="zero-one"), test_path)

    commands = {
        "analyze": ["analyze", "--trace", trace_path, "--policy", "entropy",
                    "--tau", "0.8", "--ece"],
        "bounds": ["bounds", "--trace", trace_path, "--policy", "entropy",
                   "--tau", "0.8", "--kl", "0.1", "--epsilon", "0.01",
                   "--d-eff", "8", "--alpha", "0.5", "--k-easy", "1",
                   "--target-eps", "0.1", "--observed-gap", "0.02"],
        "sweep": ["sweep", "--trace", trace_path, "--validation", val_path,
                  "--test", test_path, "--taus", "0.9,0.7,0.5"],
        "simulate": ["simulate", "--n-train", "250", "--n-test", "400",
                     "--k", "3", "--widths", "8,16,16", "--epochs", "25",
                     "--seeds", "42,123", "--taus", "0.9,0.7"],
        "epsilon": ["epsilon", "--trace", trace_path, "--policy", "entropy", "--tau", "0.8"],
        "ece": ["ece", "--trace", trace_path, "--policy", "entropy", "--tau", "0.8"],
        "report": ["report", "--trace", trace_path, "--policy", "entropy", "--tau", "0.8"],
    }
    mismatches = []
    for name, argv in commands.items():
        outputs = []
        for run_id in (1, 2):
            outdir = tmp_path / f"{name}-{run_id}"
            rc = cli_main([str(a) for a in argv] + ["--out", str(outdir)])
            assert rc == 0, f"{name} exited {rc}"
            blobs = {
                p.name: p.read_bytes()
                for p in sorted(outdir.iterdir())
                if p.suffix in (".json", ".tsv")
            }
            outputs.append(blobs)
        if outputs[0] != outputs[1]:
            mismatches.append(name)
    report(
        "cli-determinism",
        not mismatches,
        "all 7 commands byte-identical on rerun" if not mismatches
        else f"mismatched: {mismatches}",
    )
