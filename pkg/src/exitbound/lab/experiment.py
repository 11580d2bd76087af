"""Seeded experiment harness: train, trace, apply policies, measure gaps
and bounds, and correlate the gap with the exit-depth entropy.

Runs use zero-one loss throughout so that empirical losses live in [0, 1]
and the bound comparisons are well-posed.  Each seed controls dataset
draw, network initialization, and batch order; seeds run independently
and aggregate in the listed order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import stats as scipy_stats

from ..bounds import BoundInputs, deterministic_bound, explicit_bound
from ..errors import DomainError
from ..policies import PolicyConfig, apply_policy
from ..stats import depth_stats, mean_policy_loss
from .data import SyntheticSpec, generate_dataset
from .net import emit_trace, train_model

DEFAULT_SEEDS = (42, 123, 456, 789, 1024)

# Entropy thresholds as fractions of ln C, largest (earliest exits) first.
DEFAULT_TAU_FRACTIONS = (0.99, 0.955, 0.92, 0.885, 0.85, 0.815)


def default_tau_grid(C: int) -> tuple:
    """Entropy thresholds in nats, aggressive to conservative."""
    return tuple(round(f * float(np.log(C)), 6) for f in DEFAULT_TAU_FRACTIONS)


def default_policy_grid(K: int, C: int) -> list:
    """Six entropy thresholds plus the fixed full-depth baseline."""
    grid = [PolicyConfig.entropy(tau) for tau in default_tau_grid(C)]
    grid.append(PolicyConfig.fixed(K))
    return grid


def _policy_label(policy: PolicyConfig) -> str:
    if policy.kind == "entropy-threshold":
        return f"entropy@{policy.tau:g}"
    if policy.kind == "confidence-threshold":
        return f"confidence@{policy.tau:g}"
    if policy.kind == "patience":
        return f"patience@{policy.patience_t}"
    if policy.kind == "fixed-depth":
        return f"fixed@{policy.fixed_k}"
    return "stochastic"


@dataclass(frozen=True, eq=False)
class PolicyRow:
    seed: int
    label: str
    policy: PolicyConfig
    expected_depth: float
    H_marginal: float
    train_loss: float
    test_loss: float
    gap: float
    det_bound: float
    explicit_total: float
    tightness: Optional[float]
    speedup: float


@dataclass(frozen=True, eq=False)
class PolicySummary:
    label: str
    kind: str
    tau: Optional[float]
    mean_expected_depth: float
    mean_H: float
    mean_train_loss: float
    mean_test_loss: float
    mean_gap: float
    std_gap: float
    mean_det_bound: float
    mean_speedup: float
    mean_tightness: Optional[float]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    rows: tuple  # PolicyRow per seed x policy
    summary: tuple  # PolicySummary per policy, grid order
    pearson_r: float
    spearman_rho: float
    bound_validity_fraction: float
    seeds: tuple
    spec: SyntheticSpec
    delta: float
    partial: bool
    failures: tuple  # (seed, message) for seeds that errored


def run_experiment(
    spec: SyntheticSpec,
    K: int,
    policies,
    delta: float,
    seeds=DEFAULT_SEEDS,
    widths=None,
    epochs: int = 350,
    learning_rate: float = 0.12,
    batch_size: int = 64,
) -> ExperimentResult:
    """Train per seed, evaluate every policy, and aggregate across seeds.

    A seed whose training fails is recorded in ``failures`` and skipped;
    the result is then flagged partial.
    """
    policies = list(policies)
    if len(policies) < 2:
        raise DomainError("run_experiment needs at least 2 policy settings")
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise DomainError("run_experiment needs at least 1 seed")
    if widths is None:
        widths = default_widths(K)
    rows = []
    failures = []
    for seed in seeds:
        try:
            rows.extend(
                _run_seed(
                    spec, K, policies, delta, seed, widths, epochs,
                    learning_rate, batch_size,
                )
            )
        except DomainError as exc:
            failures.append((seed, str(exc)))
    if not rows:
        raise DomainError(f"all seeds failed: {failures}")
    summary = _summarize(rows, policies)
    pearson, spearman = _gap_entropy_correlation(summary)
    valid = [row.det_bound >= row.test_loss for row in rows]
    return ExperimentResult(
        rows=tuple(rows),
        summary=summary,
        pearson_r=pearson,
        spearman_rho=spearman,
        bound_validity_fraction=float(np.mean(valid)),
        seeds=seeds,
        spec=spec,
        delta=delta,
        partial=bool(failures),
        failures=tuple(failures),
    )


def default_widths(K: int) -> tuple:
    """Narrow first block (keeps the shallow head weak on the hard rings),
    wider later blocks."""
    return (10,) + (48,) * (K - 1)


def _run_seed(spec, K, policies, delta, seed, widths, epochs, learning_rate, batch_size):
    data = generate_dataset(replace(spec, seed=seed))
    net = train_model(
        data.train, K, widths, epochs, learning_rate, seed,
        batch_size=batch_size,
    )
    train_trace = emit_trace(net, data.train, "train", loss_kind="zero-one")
    test_trace = emit_trace(net, data.test, "test", loss_kind="zero-one")
    rows = []
    for policy in policies:
        train_assign = apply_policy(train_trace, policy)
        test_assign = apply_policy(test_trace, policy)
        st = depth_stats(train_assign)
        train_loss = mean_policy_loss(train_trace, train_assign)
        test_loss = mean_policy_loss(test_trace, test_assign)
        gap = test_loss - train_loss
        inputs = BoundInputs.from_stats(st, delta=delta, empirical_loss=train_loss)
        det = deterministic_bound(inputs)
        expl = explicit_bound(inputs).total
        tightness = (det - train_loss) / gap if gap > 0 else None
        rows.append(
            PolicyRow(
                seed=seed,
                label=_policy_label(policy),
                policy=policy,
                expected_depth=st.expected_depth,
                H_marginal=st.H_marginal,
                train_loss=train_loss,
                test_loss=test_loss,
                gap=gap,
                det_bound=det,
                explicit_total=expl,
                tightness=tightness,
                speedup=K / st.expected_depth,
            )
        )
    return rows


def _summarize(rows, policies) -> tuple:
    out = []
    for policy in policies:
        label = _policy_label(policy)
        group = [r for r in rows if r.label == label]
        gaps = np.array([r.gap for r in group])
        tightnesses = [r.tightness for r in group if r.tightness is not None]
        out.append(
            PolicySummary(
                label=label,
                kind=policy.kind,
                tau=policy.tau,
                mean_expected_depth=float(np.mean([r.expected_depth for r in group])),
                mean_H=float(np.mean([r.H_marginal for r in group])),
                mean_train_loss=float(np.mean([r.train_loss for r in group])),
                mean_test_loss=float(np.mean([r.test_loss for r in group])),
                mean_gap=float(gaps.mean()),
                std_gap=float(gaps.std(ddof=1)) if len(gaps) > 1 else 0.0,
                mean_det_bound=float(np.mean([r.det_bound for r in group])),
                mean_speedup=float(np.mean([r.speedup for r in group])),
                mean_tightness=float(np.mean(tightnesses)) if tightnesses else None,
            )
        )
    return tuple(out)


def _gap_entropy_correlation(summary) -> tuple:
    """Correlation of seed-averaged gap with seed-averaged H across the
    threshold policies (fixed-depth and other kinds are excluded)."""
    points = [
        (s.mean_H, s.mean_gap)
        for s in summary
        if s.kind in ("entropy-threshold", "confidence-threshold")
    ]
    if len(points) < 2:
        return float("nan"), float("nan")
    h, g = zip(*points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pearson = float(scipy_stats.pearsonr(h, g).statistic)
        spearman = float(scipy_stats.spearmanr(h, g).statistic)
    return pearson, spearman


@dataclass(frozen=True)
class GapOrdering:
    """Mean gaps of the named policies plus the pooled-std tolerance checks."""

    aggressive: float
    moderate: float
    conservative: float
    fixed: float
    pooled_std: float
    holds_within_one_std: bool


def gap_ordering(result: ExperimentResult) -> GapOrdering:
    """Aggressive <= moderate <= conservative <= fixed, within one pooled std.

    Aggressive is the largest threshold in the grid (earliest exits),
    conservative the smallest, moderate the middle entry.
    """
    thresholds = [s for s in result.summary if s.kind == "entropy-threshold"]
    fixed = [s for s in result.summary if s.kind == "fixed-depth"]
    if len(thresholds) < 3 or not fixed:
        raise DomainError("gap_ordering needs >= 3 entropy thresholds and a fixed policy")
    thresholds = sorted(thresholds, key=lambda s: -s.tau)
    aggressive = thresholds[0]
    moderate = thresholds[len(thresholds) // 2]
    conservative = thresholds[-1]
    chain = [aggressive, moderate, conservative, fixed[0]]
    pooled = float(np.sqrt(np.mean([s.std_gap**2 for s in chain])))
    holds = all(
        chain[i].mean_gap <= chain[i + 1].mean_gap + pooled for i in range(3)
    )
    return GapOrdering(
        aggressive=aggressive.mean_gap,
        moderate=moderate.mean_gap,
        conservative=conservative.mean_gap,
        fixed=fixed[0].mean_gap,
        pooled_std=pooled,
        holds_within_one_std=holds,
    )
