"""Closed-form generalization bounds driven by exit-depth statistics.

Every bound takes the same immutable :class:`BoundInputs` snapshot.  All
logarithms are natural; the single nats-to-bits conversion lives inside
:func:`explicit_bound`, whose leading coefficient is sqrt(2 ln 2).

Hidden constants are explicit, user-settable parameters: ``constant_c``
(default 1) scales the per-depth capacity terms of :func:`advantage`, and
``sc_constant`` (default 2, Hoeffding-style) scales :func:`sample_complexity`.
The defaults are documented conventions, not derived values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, MissingInputError

# Leading coefficient of the entropy term in explicit_bound.
ENTROPY_COEFFICIENT = math.sqrt(2.0 * math.log(2.0))


def _as_vector(value, name):
    if value is None:
        return None
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be a 1-D vector")
    return arr


@dataclass(frozen=True, eq=False)
class BoundInputs:
    """Everything the bound calculators consume, validated once."""

    n: int
    K: int
    H_marginal: float  # nats
    delta: float
    expected_depth: Optional[float] = None
    empirical_loss: float = 0.0
    kl_total: float = 0.0
    kl_per_depth: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    n_k: Optional[np.ndarray] = None
    epsilon: float = 0.0
    per_depth_complexity: Optional[np.ndarray] = None
    d_eff: Optional[float] = None
    alpha: Optional[float] = None
    k_easy: Optional[int] = None
    constant_c: float = 1.0
    sc_constant: float = 2.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.K < 1:
            raise DomainError(f"K must be >= 1, got {self.K}")
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not math.isfinite(self.H_marginal) or self.H_marginal < 0:
            raise DomainError(f"H_marginal must be finite and >= 0, got {self.H_marginal}")
        if self.kl_total < 0 or not math.isfinite(self.kl_total):
            raise DomainError("kl_total must be finite and >= 0")
        if self.epsilon < 0:
            raise DomainError("epsilon must be >= 0")
        if self.empirical_loss < 0:
            raise DomainError("empirical_loss must be >= 0")
        for name in ("kl_per_depth", "p", "n_k", "per_depth_complexity"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name))
        if self.p is not None and abs(self.p.sum() - 1.0) > 1e-9:
            raise DomainError(f"p sums to {self.p.sum()}, outside 1 +/- 1e-9")
        if self.n_k is not None and int(round(self.n_k.sum())) != self.n:
            raise DomainError(f"n_k sums to {self.n_k.sum()}, expected n={self.n}")
        if self.alpha is not None and not (0.0 <= self.alpha <= 1.0):
            raise DomainError("alpha must lie in [0, 1]")

    @classmethod
    def from_stats(cls, stats, delta, empirical_loss=0.0, **aux) -> "BoundInputs":
        """Snapshot a DepthStats object plus auxiliary inputs."""
        return cls(
            n=stats.n,
            K=stats.K,
            H_marginal=stats.H_marginal,
            expected_depth=stats.expected_depth,
            delta=delta,
            empirical_loss=empirical_loss,
            p=stats.p,
            n_k=stats.counts,
            **aux,
        )


def _confidence_term(n: int, delta: float) -> float:
    return math.log(2.0 * math.sqrt(n) / delta)


def main_bound(inp: BoundInputs) -> float:
    """Posterior-loss bound: empirical loss plus the entropy-aware KL term."""
    gap = math.sqrt(
        (inp.kl_total + inp.H_marginal + _confidence_term(inp.n, inp.delta))
        / (2.0 * inp.n)
    )
    return inp.empirical_loss + gap


def deterministic_bound(inp: BoundInputs) -> float:
    """Bound for deterministic policies; the KL-to-prior term drops out."""
    gap = math.sqrt(
        (inp.H_marginal + _confidence_term(inp.n, inp.delta)) / (2.0 * inp.n)
    )
    return inp.empirical_loss + gap


def naive_lnk_bound(inp: BoundInputs) -> float:
    """Baseline that charges ln K instead of the exit entropy."""
    gap = math.sqrt(
        (inp.kl_total + math.log(inp.K) + _confidence_term(inp.n, inp.delta))
        / (2.0 * inp.n)
    )
    return inp.empirical_loss + gap


def weighted_bound(inp: BoundInputs) -> float:
    """Per-depth combination with depth-specific sample counts and KL terms."""
    if inp.p is None or inp.n_k is None or inp.kl_per_depth is None:
        raise MissingInputError("weighted_bound requires p, n_k, and kl_per_depth")
    if not (len(inp.p) == len(inp.n_k) == len(inp.kl_per_depth) == inp.K):
        raise DomainError("p, n_k, kl_per_depth must all have K entries")
    total = 0.0
    for pk, nk, kl in zip(inp.p, inp.n_k, inp.kl_per_depth):
        if pk == 0.0:
            continue
        if nk <= 0:
            raise DomainError(f"depth with p_k={pk} > 0 has n_k={nk}")
        term = math.sqrt(
            (kl + math.log(2.0 * inp.K * math.sqrt(nk) / inp.delta)) / (2.0 * nk)
        )
        total += pk * term
    return inp.empirical_loss + total


@dataclass(frozen=True)
class ExplicitBound:
    total: float
    entropy_term: float
    complexity_term: float


def explicit_bound(inp: BoundInputs) -> ExplicitBound:
    """Split-constant bound: sqrt(2 ln 2 / n) * sqrt(H_bits) plus a ln K term.

    The entropy enters in bits here and only here; everything else in the
    package stays in nats.
    """
    h_bits = inp.H_marginal / math.log(2.0)
    entropy_term = math.sqrt(2.0 * math.log(2.0) / inp.n) * math.sqrt(h_bits)
    complexity_term = math.sqrt(
        (math.log(inp.K) + _confidence_term(inp.n, inp.delta)) / (2.0 * inp.n)
    )
    return ExplicitBound(
        total=inp.empirical_loss + entropy_term + complexity_term,
        entropy_term=entropy_term,
        complexity_term=complexity_term,
    )


def epsilon_penalty(epsilon: float, K: int) -> float:
    """Additive cost of epsilon-approximate label independence."""
    return epsilon * K


def epsilon_bound(inp: BoundInputs) -> float:
    """main_bound plus the label-dependence penalty epsilon * K."""
    if inp.epsilon == 0.0:
        return main_bound(inp)
    return main_bound(inp) + epsilon_penalty(inp.epsilon, inp.K)


@dataclass(frozen=True)
class ComplexityCombination:
    weighted: float
    envelope: float


def depth_weighted_complexity(inp: BoundInputs) -> ComplexityCombination:
    """Exit-weighted capacity sum and its expected-depth envelope.

    Requires per-depth complexities; warns (but proceeds) if they are not
    non-decreasing in depth, since the envelope argument assumes nested
    classifier classes.
    """
    r = inp.per_depth_complexity
    if r is None:
        raise MissingInputError("depth_weighted_complexity requires per_depth_complexity")
    if len(r) != inp.K:
        raise DomainError(f"per_depth_complexity has {len(r)} entries, expected K={inp.K}")
    if inp.p is None or inp.expected_depth is None:
        raise MissingInputError("depth_weighted_complexity requires p and expected_depth")
    if np.any(r < 0):
        raise DomainError("per-depth complexities must be nonnegative")
    if np.any(np.diff(r) < 0):
        warnings.warn(
            "per-depth complexities are not non-decreasing; the envelope "
            "assumes nested classifier classes",
            stacklevel=2,
        )
    weighted = float(np.dot(inp.p, r))
    envelope = inp.expected_depth * float(np.max(r / np.arange(1, inp.K + 1)))
    assert weighted <= envelope + 1e-12
    return ComplexityCombination(weighted=weighted, envelope=envelope)


@dataclass(frozen=True)
class SampleComplexity:
    n_adaptive: int
    n_fixed: int
    ratio: float


def sample_complexity(inp: BoundInputs, target_eps: float) -> SampleComplexity:
    """Samples needed for a target gap, adaptive versus fixed-depth."""
    if target_eps <= 0:
        raise DomainError("target_eps must be > 0")
    if inp.d_eff is None or inp.expected_depth is None:
        raise MissingInputError("sample_complexity requires d_eff and expected_depth")
    c = inp.sc_constant
    numerator = (
        inp.expected_depth * inp.d_eff
        + inp.H_marginal
        + math.log(1.0 / inp.delta)
    )
    n_adaptive = math.ceil(c * numerator / target_eps**2)
    n_fixed = math.ceil(c * inp.K * inp.d_eff / target_eps**2)
    return SampleComplexity(
        n_adaptive=n_adaptive, n_fixed=n_fixed, ratio=n_fixed / n_adaptive
    )


@dataclass(frozen=True)
class AdvantageResult:
    advantage: float
    composite_bound: float
    full_depth_bound: float
    easy_depth_bound: float


def advantage(inp: BoundInputs) -> AdvantageResult:
    """Gap-bound improvement from routing an easy fraction to a shallow exit.

    With B_k = c * sqrt(k * d / n), returns alpha * (B_K - B_{k_easy})
    together with the composite bound alpha*B_{k_easy} + (1-alpha)*B_K.
    """
    if inp.alpha is None or inp.k_easy is None or inp.d_eff is None:
        raise MissingInputError("advantage requires alpha, k_easy, and d_eff")
    if inp.k_easy >= inp.K:
        raise DomainError(f"k_easy={inp.k_easy} must be < K={inp.K}")
    if inp.k_easy < 1:
        raise DomainError("k_easy must be >= 1")
    c = inp.constant_c
    scale = math.sqrt(inp.d_eff / inp.n)
    b_easy = c * math.sqrt(inp.k_easy) * scale
    b_full = c * math.sqrt(inp.K) * scale
    composite = inp.alpha * b_easy + (1.0 - inp.alpha) * b_full
    adv = c * inp.alpha * (math.sqrt(inp.K) - math.sqrt(inp.k_easy)) * scale
    if inp.alpha > 0:
        assert composite < b_full
    return AdvantageResult(
        advantage=adv,
        composite_bound=composite,
        full_depth_bound=b_full,
        easy_depth_bound=b_easy,
    )


def depth_kl_identity(p, K: int) -> float:
    """KL(p || uniform over K depths), computed directly as sum p_k ln(p_k K).

    Equals ln K minus the entropy of p to within floating-point error; the
    agreement of the two routes is itself a tested identity.
    """
    arr = np.asarray(p, dtype=np.float64)
    if len(arr) != K:
        raise DomainError(f"p has {len(arr)} entries, expected K={K}")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
        raise DomainError("p must be a probability vector")
    nz = arr[arr > 0]
    return float(np.sum(nz * np.log(nz * K)))


def gaussian_kl(mean_sq_norm: float, dim: int, prior_var: float, posterior_var: float) -> float:
    """KL between isotropic Gaussians sharing dimension ``dim``."""
    if prior_var <= 0 or posterior_var <= 0:
        raise DomainError("variances must be > 0")
    if dim < 1:
        raise DomainError("dim must be >= 1")
    if mean_sq_norm < 0:
        raise DomainError("mean_sq_norm must be >= 0")
    ratio = posterior_var / prior_var
    return 0.5 * (
        dim * ratio + mean_sq_norm / prior_var - dim + dim * math.log(prior_var / posterior_var)
    )


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Every computable bound for one configuration, with full provenance."""

    inputs: BoundInputs
    main: float
    deterministic: float
    explicit: ExplicitBound
    epsilon_adjusted: float
    naive_lnk: float
    weighted: Optional[float] = None
    complexity: Optional[ComplexityCombination] = None
    samples: Optional[SampleComplexity] = None
    advantage_result: Optional[AdvantageResult] = None
    tightness_ratio: Optional[float] = None
    observed_gap: Optional[float] = None
    loss_kind: str = "zero-one"
    vacuous: tuple = field(default_factory=tuple)


def bound_report(
    inp: BoundInputs,
    loss_kind: str = "zero-one",
    observed_gap: Optional[float] = None,
    target_eps: Optional[float] = None,
) -> BoundReport:
    """Evaluate every bound whose inputs are present.

    Bounds above 1 under zero-one loss are flagged as vacuous, never
    clamped.  The tightness ratio divides the main bound's gap term by an
    observed gap when one is supplied.
    """
    main = main_bound(inp)
    det = deterministic_bound(inp)
    exp = explicit_bound(inp)
    eps = epsilon_bound(inp)
    naive = naive_lnk_bound(inp)
    weighted = None
    if inp.p is not None and inp.n_k is not None and inp.kl_per_depth is not None:
        weighted = weighted_bound(inp)
    complexity = None
    if inp.per_depth_complexity is not None:
        complexity = depth_weighted_complexity(inp)
    samples = None
    if target_eps is not None:
        samples = sample_complexity(inp, target_eps)
    adv = None
    if inp.alpha is not None and inp.k_easy is not None and inp.d_eff is not None:
        adv = advantage(inp)
    tightness = None
    if observed_gap is not None and observed_gap > 0:
        tightness = (main - inp.empirical_loss) / observed_gap
    named = {
        "main": main,
        "deterministic": det,
        "explicit": exp.total,
        "epsilon_adjusted": eps,
        "naive_lnk": naive,
    }
    if weighted is not None:
        named["weighted"] = weighted
    vacuous = tuple(name for name, value in named.items() if loss_kind == "zero-one" and value > 1.0)
    return BoundReport(
        inputs=inp,
        main=main,
        deterministic=det,
        explicit=exp,
        epsilon_adjusted=eps,
        naive_lnk=naive,
        weighted=weighted,
        complexity=complexity,
        samples=samples,
        advantage_result=adv,
        tightness_ratio=tightness,
        observed_gap=observed_gap,
        loss_kind=loss_kind,
        vacuous=vacuous,
    )
