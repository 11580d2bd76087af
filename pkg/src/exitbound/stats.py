"""Distributional statistics over exit depth.

All entropies are computed and stored in nats; conversion to bits happens
only inside the bound engine.  For deterministic assignments the
conditional entropy is exactly 0 and the mutual information equals the
marginal entropy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, HeaderMismatchError, UnlabeledTraceError
from .policies import DepthAssignment, PolicyConfig, _entropy_rows, apply_policy
from .trace import ExitTrace, stable_softmax


@dataclass(frozen=True, eq=False)
class DepthStats:
    p: np.ndarray  # marginal exit distribution over K depths
    counts: np.ndarray  # integer sample counts per depth (n_k)
    expected_depth: float
    H_marginal: float  # nats
    H_conditional: float  # nats; 0 for deterministic assignments
    mutual_information: float  # H_marginal - H_conditional
    n: int

    @property
    def K(self) -> int:
        return len(self.p)


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    mean_confidence: Optional[float]
    accuracy: Optional[float]
    count: int


@dataclass(frozen=True, eq=False)
class CalibrationReport:
    ece: float
    bins: tuple  # CalibrationBin per bin, low to high
    n: int


@dataclass(frozen=True)
class EpsilonEstimate:
    """Max deviation between per-class and marginal exit distributions.

    ``excluded_labels`` lists label classes with zero samples; non-empty
    means the estimate was computed on a reduced label set.
    """

    value: float
    excluded_labels: tuple

    @property
    def warning(self) -> bool:
        return bool(self.excluded_labels)


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return max(0.0, float(-np.sum(nz * np.log(nz))))


def depth_stats(assignment: DepthAssignment) -> DepthStats:
    """Marginal/conditional exit entropies, counts, and expected depth."""
    K = assignment.K
    n = assignment.n
    if n == 0:
        raise DomainError("assignment is empty")
    if assignment.deterministic:
        counts = np.bincount(assignment.depths, minlength=K + 1)[1:]
        p = counts / n
        h_cond = 0.0
    else:
        p = assignment.table.mean(axis=0)
        h_cond = float(np.mean(_entropy_rows(assignment.table)))
        # round-half-even, matching Python's round()
        counts = np.array([round(n * pk) for pk in p], dtype=np.int64)
    h_marg = _entropy(p)
    expected = float(np.dot(np.arange(1, K + 1), p))
    return DepthStats(
        p=p,
        counts=counts,
        expected_depth=expected,
        H_marginal=h_marg,
        H_conditional=h_cond,
        mutual_information=h_marg - h_cond,
        n=n,
    )


def _exit_confidence(trace: ExitTrace, depths: np.ndarray) -> np.ndarray:
    probs = stable_softmax(trace.logits_tensor())
    rows = np.arange(trace.n)
    return probs[rows, depths - 1].max(axis=-1)


def _exit_correct(trace: ExitTrace, depths: np.ndarray) -> np.ndarray:
    logits = trace.logits_tensor()
    rows = np.arange(trace.n)
    preds = logits[rows, depths - 1].argmax(axis=-1) + 1
    return preds == trace.labels_vector()


def ece(trace: ExitTrace, assignment: DepthAssignment, bins: int = 15) -> CalibrationReport:
    """Expected calibration error of the confidence at the realized exits.

    Confidence is the max softmax probability at the depth each sample
    actually used.  Bins are equal-width over [0, 1] and right-closed;
    confidence 0 falls into the first bin.
    """
    if not trace.header.labeled:
        raise UnlabeledTraceError("ece requires a labeled trace")
    if not assignment.deterministic:
        raise DomainError("ece requires a deterministic assignment")
    if bins < 1:
        raise DomainError("bins must be >= 1")
    conf = _exit_confidence(trace, assignment.depths)
    correct = _exit_correct(trace, assignment.depths)
    n = trace.n
    idx = np.ceil(conf * bins).astype(np.int64) - 1
    idx = np.clip(idx, 0, bins - 1)
    total = 0.0
    out_bins = []
    for b in range(bins):
        mask = idx == b
        count = int(mask.sum())
        if count:
            mean_conf = float(conf[mask].mean())
            acc = float(correct[mask].mean())
            total += (count / n) * abs(acc - mean_conf)
        else:
            mean_conf = None
            acc = None
        out_bins.append(
            CalibrationBin(
                lower=b / bins,
                upper=(b + 1) / bins,
                mean_confidence=mean_conf,
                accuracy=acc,
                count=count,
            )
        )
    return CalibrationReport(ece=total, bins=tuple(out_bins), n=n)


def epsilon_estimate(trace: ExitTrace, assignment: DepthAssignment) -> EpsilonEstimate:
    """Label-independence proxy: max_k,y |P(D=k | Y=y) - P(D=k)|.

    Classes with zero samples are excluded and reported via the result's
    warning flag.
    """
    if not trace.header.labeled:
        raise UnlabeledTraceError("epsilon_estimate requires a labeled trace")
    if not assignment.deterministic:
        raise DomainError("epsilon_estimate requires a deterministic assignment")
    labels = trace.labels_vector()
    depths = assignment.depths
    K, C = trace.K, trace.C
    marginal = np.bincount(depths, minlength=K + 1)[1:] / trace.n
    worst = 0.0
    excluded = []
    for y in range(1, C + 1):
        mask = labels == y
        count = int(mask.sum())
        if count == 0:
            excluded.append(y)
            continue
        cond = np.bincount(depths[mask], minlength=K + 1)[1:] / count
        worst = max(worst, float(np.max(np.abs(cond - marginal))))
    return EpsilonEstimate(value=worst, excluded_labels=tuple(excluded))


def mean_policy_loss(trace: ExitTrace, assignment: DepthAssignment) -> float:
    """Mean per-sample loss at the policy-selected exit (header loss kind)."""
    losses = trace.loss_matrix()
    if assignment.deterministic:
        rows = np.arange(trace.n)
        return float(losses[rows, assignment.depths - 1].mean())
    return float((losses * assignment.table).sum(axis=1).mean())


def policy_accuracy(trace: ExitTrace, assignment: DepthAssignment) -> float:
    """Argmax accuracy at the realized exits, independent of the header loss kind."""
    if not assignment.deterministic:
        raise DomainError("policy_accuracy requires a deterministic assignment")
    return float(_exit_correct(trace, assignment.depths).mean())


def gap(train_trace: ExitTrace, eval_trace: ExitTrace, policy: PolicyConfig) -> float:
    """Evaluation-minus-training mean loss under one shared policy."""
    for trc, name in ((train_trace, "train"), (eval_trace, "eval")):
        if not trc.header.labeled:
            raise UnlabeledTraceError(f"{name} trace must be labeled")
    ht, he = train_trace.header, eval_trace.header
    if (ht.K, ht.C, ht.loss_kind) != (he.K, he.C, he.loss_kind):
        raise HeaderMismatchError(
            f"trace headers differ: (K={ht.K}, C={ht.C}, {ht.loss_kind}) vs "
            f"(K={he.K}, C={he.C}, {he.loss_kind})"
        )
    train_loss = mean_policy_loss(train_trace, apply_policy(train_trace, policy))
    eval_loss = mean_policy_loss(eval_trace, apply_policy(eval_trace, policy))
    return eval_loss - train_loss
