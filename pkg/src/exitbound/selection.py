"""Bound-guided threshold selection and its validation-tuned comparator.

The selector evaluates, for every candidate threshold, the split-constant
bound at that threshold's empirical training loss and exit entropy, then
picks the minimizer.  Only the training split is touched; the comparator
additionally tunes on validation loss and reports the test-accuracy
difference between the two choices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import BoundInputs, explicit_bound
from .errors import ConfigMismatchError, DomainError, HeaderMismatchError, UnlabeledTraceError
from .policies import policy_sweep
from .stats import depth_stats, mean_policy_loss, policy_accuracy
from .trace import ExitTrace


@dataclass(frozen=True, eq=False)
class CandidateRow:
    tau: float
    p: np.ndarray
    H_nats: float
    expected_depth: float
    bound: float
    train_loss: float


@dataclass(frozen=True, eq=False)
class SelectionResult:
    tau_star: float
    table: tuple  # CandidateRow per candidate, in input order
    validation_tau: Optional[float] = None
    test_accuracy_delta: Optional[float] = None


def _argmin_tau(pairs):
    """Minimize the value; break exact ties toward the smaller tau."""
    best_tau, best_value = None, None
    for tau, value in pairs:
        if best_value is None or value < best_value or (value == best_value and tau < best_tau):
            best_tau, best_value = tau, value
    return best_tau


def select_threshold(
    train_trace: ExitTrace, kind: str, candidates, delta: float, K: int
) -> SelectionResult:
    """Pick the candidate threshold minimizing the training-only bound."""
    candidates = [float(tau) for tau in candidates]
    if not candidates:
        raise DomainError("candidates must be nonempty")
    if not train_trace.header.labeled:
        raise UnlabeledTraceError("select_threshold requires a labeled train trace")
    if K != train_trace.K:
        raise ConfigMismatchError(f"K={K} does not match trace K={train_trace.K}")
    rows = []
    for tau, assignment in zip(candidates, policy_sweep(train_trace, kind, candidates)):
        stats = depth_stats(assignment)
        loss = mean_policy_loss(train_trace, assignment)
        bound = explicit_bound(
            BoundInputs(
                n=train_trace.n,
                K=K,
                H_marginal=stats.H_marginal,
                delta=delta,
                empirical_loss=loss,
            )
        ).total
        rows.append(
            CandidateRow(
                tau=tau,
                p=stats.p,
                H_nats=stats.H_marginal,
                expected_depth=stats.expected_depth,
                bound=bound,
                train_loss=loss,
            )
        )
    tau_star = _argmin_tau((row.tau, row.bound) for row in rows)
    return SelectionResult(tau_star=tau_star, table=tuple(rows))


def compare_with_validation(
    train_trace: ExitTrace,
    val_trace: ExitTrace,
    test_trace: ExitTrace,
    kind: str,
    candidates,
    delta: float,
    K: int,
) -> SelectionResult:
    """Bound-guided versus validation-tuned threshold, scored on test accuracy."""
    candidates = [float(tau) for tau in candidates]
    headers = [t.header for t in (train_trace, val_trace, test_trace)]
    keys = {(h.K, h.C, h.loss_kind) for h in headers}
    if len(keys) != 1:
        raise HeaderMismatchError(f"traces disagree on (K, C, loss_kind): {sorted(keys)}")
    for trc, name in ((val_trace, "validation"), (test_trace, "test")):
        if not trc.header.labeled:
            raise UnlabeledTraceError(f"{name} trace must be labeled")
    result = select_threshold(train_trace, kind, candidates, delta, K)
    val_assignments = policy_sweep(val_trace, kind, candidates)
    validation_tau = _argmin_tau(
        (tau, mean_policy_loss(val_trace, assignment))
        for tau, assignment in zip(candidates, val_assignments)
    )
    test_assignments = dict(
        zip(candidates, policy_sweep(test_trace, kind, candidates))
    )
    acc_star = policy_accuracy(test_trace, test_assignments[result.tau_star])
    acc_val = policy_accuracy(test_trace, test_assignments[validation_tau])
    return SelectionResult(
        tau_star=result.tau_star,
        table=result.table,
        validation_tau=validation_tau,
        test_accuracy_delta=acc_star - acc_val,
    )
