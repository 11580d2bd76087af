"""Exit policies: rules mapping each sample's per-exit outputs to a depth.

Policies read logits only, never labels.  Deterministic kinds produce one
depth per sample; the stochastic kind carries a per-sample distribution
over depths supplied by an external router.

Threshold strictness: the entropy rule exits at the first depth whose
predictive entropy is strictly below tau; the confidence rule exits at the
first depth whose max softmax probability is strictly above tau.  Ties at
exact equality continue to the next depth.  Patience counting starts at
depth 1 with a run of 1 and exits at the first depth ending a window of
``patience_t`` identical argmax predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigMismatchError, DomainError
from .trace import ExitTrace, stable_softmax

POLICY_KINDS = (
    "entropy-threshold",
    "confidence-threshold",
    "patience",
    "fixed-depth",
    "stochastic-table",
)

_REQUIRED_FIELDS = {
    "entropy-threshold": ("tau",),
    "confidence-threshold": ("tau",),
    "patience": ("patience_t",),
    "fixed-depth": ("fixed_k",),
    "stochastic-table": ("table",),
}


@dataclass(frozen=True, eq=False)
class PolicyConfig:
    kind: str
    tau: Optional[float] = None
    patience_t: Optional[int] = None
    fixed_k: Optional[int] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise DomainError(f"unknown policy kind {self.kind!r}")
        required = _REQUIRED_FIELDS[self.kind]
        for name in ("tau", "patience_t", "fixed_k", "table"):
            value = getattr(self, name)
            if name in required and value is None:
                raise DomainError(f"policy kind {self.kind!r} requires {name}")
            if name not in required and value is not None:
                raise DomainError(f"policy kind {self.kind!r} does not take {name}")
        if self.kind == "entropy-threshold" and self.tau < 0:
            raise DomainError("entropy threshold tau must be >= 0")
        if self.kind == "confidence-threshold" and not (0 < self.tau <= 1):
            raise DomainError("confidence threshold tau must be in (0, 1]")
        if self.kind == "patience" and self.patience_t < 1:
            raise DomainError("patience_t must be >= 1")
        if self.kind == "fixed-depth" and self.fixed_k < 1:
            raise DomainError("fixed_k must be >= 1")

    @classmethod
    def entropy(cls, tau: float) -> "PolicyConfig":
        return cls(kind="entropy-threshold", tau=float(tau))

    @classmethod
    def confidence(cls, tau: float) -> "PolicyConfig":
        return cls(kind="confidence-threshold", tau=float(tau))

    @classmethod
    def patience(cls, t: int) -> "PolicyConfig":
        return cls(kind="patience", patience_t=int(t))

    @classmethod
    def fixed(cls, k: int) -> "PolicyConfig":
        return cls(kind="fixed-depth", fixed_k=int(k))

    @classmethod
    def stochastic(cls, table) -> "PolicyConfig":
        return cls(kind="stochastic-table", table=np.asarray(table, dtype=np.float64))

    def describe(self) -> dict:
        """Active fields as a small key-value block for report embedding."""
        out = {"kind": self.kind}
        for name in _REQUIRED_FIELDS[self.kind]:
            if name == "table":
                out["table"] = f"<{self.table.shape[0]}x{self.table.shape[1]} table>"
            else:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True, eq=False)
class DepthAssignment:
    """Realized exit depths (or per-sample depth distributions) for one trace."""

    K: int
    policy: PolicyConfig
    depths: Optional[np.ndarray] = None  # (n,) ints in [1, K]
    table: Optional[np.ndarray] = None  # (n, K) rows summing to 1

    def __post_init__(self):
        if (self.depths is None) == (self.table is None):
            raise DomainError("assignment needs exactly one of depths or table")
        if self.depths is not None:
            if self.depths.ndim != 1:
                raise DomainError("depths must be a 1-D array")
            if self.depths.size and (
                self.depths.min() < 1 or self.depths.max() > self.K
            ):
                raise DomainError(f"depths must lie in [1, {self.K}]")
        else:
            if self.table.ndim != 2 or self.table.shape[1] != self.K:
                raise DomainError(f"table must have shape (n, {self.K})")
            if np.any(self.table < 0):
                raise DomainError("table entries must be nonnegative")
            sums = self.table.sum(axis=1)
            if np.max(np.abs(sums - 1.0)) > 1e-9:
                raise DomainError("table rows must sum to 1 within 1e-9")

    @property
    def deterministic(self) -> bool:
        return self.depths is not None

    @property
    def n(self) -> int:
        return len(self.depths) if self.deterministic else self.table.shape[0]

    def depth_distributions(self) -> np.ndarray:
        """Per-sample distributions over depths; one-hot rows when deterministic."""
        if not self.deterministic:
            return self.table
        rows = np.zeros((self.n, self.K), dtype=np.float64)
        rows[np.arange(self.n), self.depths - 1] = 1.0
        return rows


def predictive_entropy(probs) -> float:
    """Shannon entropy of a probability vector in nats, with 0*ln(0) := 0."""
    p = np.asarray(probs, dtype=np.float64)
    if np.any(p < 0):
        raise DomainError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {p.sum()}, outside 1 +/- 1e-9")
    nz = p[p > 0]
    return max(0.0, float(-np.sum(nz * np.log(nz))))


def _entropy_rows(probs: np.ndarray) -> np.ndarray:
    """Row-wise entropy of an (..., C) probability array, 0*ln(0) := 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return np.maximum(0.0, -terms.sum(axis=-1))


def _first_crossing(hit: np.ndarray, K: int) -> np.ndarray:
    """First depth whose ``hit`` flag is set, else K."""
    any_hit = hit.any(axis=1)
    first = np.argmax(hit, axis=1) + 1
    return np.where(any_hit, first, K).astype(np.int64)


def _entropy_matrix(trace: ExitTrace) -> np.ndarray:
    probs = stable_softmax(trace.logits_tensor())
    return _entropy_rows(probs)


def _confidence_matrix(trace: ExitTrace) -> np.ndarray:
    probs = stable_softmax(trace.logits_tensor())
    return probs.max(axis=-1)


def _argmax_matrix(trace: ExitTrace) -> np.ndarray:
    # np.argmax returns the first maximum: lowest class index wins ties.
    return trace.logits_tensor().argmax(axis=-1) + 1


def _patience_depths(preds: np.ndarray, t: int, K: int) -> np.ndarray:
    n = preds.shape[0]
    run = np.ones(n, dtype=np.int64)
    depth = np.where(run >= t, 1, 0)
    for k in range(1, K):
        run = np.where(preds[:, k] == preds[:, k - 1], run + 1, 1)
        depth = np.where((depth == 0) & (run >= t), k + 1, depth)
    return np.where(depth == 0, K, depth)


def apply_policy(trace: ExitTrace, policy: PolicyConfig) -> DepthAssignment:
    """Evaluate a policy on every sample of a trace.

    Pure function of the logits; label permutations cannot change the result.
    """
    K = trace.K
    if policy.kind == "entropy-threshold":
        depths = _first_crossing(_entropy_matrix(trace) < policy.tau, K)
    elif policy.kind == "confidence-threshold":
        depths = _first_crossing(_confidence_matrix(trace) > policy.tau, K)
    elif policy.kind == "patience":
        depths = _patience_depths(_argmax_matrix(trace), policy.patience_t, K)
    elif policy.kind == "fixed-depth":
        if policy.fixed_k > K:
            raise ConfigMismatchError(f"fixed_k={policy.fixed_k} exceeds trace K={K}")
        depths = np.full(trace.n, policy.fixed_k, dtype=np.int64)
    else:
        table = policy.table
        if table.shape != (trace.n, K):
            raise ConfigMismatchError(
                f"stochastic table shape {table.shape} does not match (n={trace.n}, K={K})"
            )
        return DepthAssignment(K=K, policy=policy, table=table)
    return DepthAssignment(K=K, policy=policy, depths=depths)


def policy_sweep(trace: ExitTrace, kind: str, taus) -> list:
    """Apply one threshold policy kind at several taus over a single shared pass."""
    taus = list(taus)
    if not taus:
        raise DomainError("policy_sweep requires at least one tau")
    if kind == "entropy-threshold":
        metric = _entropy_matrix(trace)
        configs = [PolicyConfig.entropy(tau) for tau in taus]
        hits = [metric < cfg.tau for cfg in configs]
    elif kind == "confidence-threshold":
        metric = _confidence_matrix(trace)
        configs = [PolicyConfig.confidence(tau) for tau in taus]
        hits = [metric > cfg.tau for cfg in configs]
    else:
        raise ConfigMismatchError(f"policy_sweep supports threshold kinds, not {kind!r}")
    return [
        DepthAssignment(K=trace.K, policy=cfg, depths=_first_crossing(hit, trace.K))
        for cfg, hit in zip(configs, hits)
    ]
