"""Exit-depth statistics, entropy-aware PAC-Bayes bounds, and threshold
selection for early-exit classifiers, plus a desk-scale synthetic lab."""

from .bounds import (
    ENTROPY_COEFFICIENT,
    AdvantageResult,
    BoundInputs,
    BoundReport,
    ComplexityCombination,
    ExplicitBound,
    SampleComplexity,
    advantage,
    bound_report,
    depth_kl_identity,
    depth_weighted_complexity,
    deterministic_bound,
    epsilon_bound,
    epsilon_penalty,
    explicit_bound,
    gaussian_kl,
    main_bound,
    naive_lnk_bound,
    sample_complexity,
    weighted_bound,
)
from .errors import (
    ConfigMismatchError,
    DomainError,
    DuplicateSampleError,
    ExitboundError,
    HeaderMismatchError,
    MissingInputError,
    PartialResultError,
    TraceParseError,
    TraceSchemaError,
    TrainingDivergedError,
    UnlabeledTraceError,
)
from .policies import (
    DepthAssignment,
    PolicyConfig,
    apply_policy,
    policy_sweep,
    predictive_entropy,
)
from .selection import (
    CandidateRow,
    SelectionResult,
    compare_with_validation,
    select_threshold,
)
from .stats import (
    CalibrationReport,
    DepthStats,
    EpsilonEstimate,
    depth_stats,
    ece,
    epsilon_estimate,
    gap,
    mean_policy_loss,
    policy_accuracy,
)
from .trace import (
    ExitRecord,
    ExitTrace,
    SampleRecord,
    TraceHeader,
    TraceSplits,
    dumps_trace,
    load_trace,
    loads_trace,
    split_trace,
    stable_softmax,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ENTROPY_COEFFICIENT",
    "AdvantageResult",
    "BoundInputs",
    "BoundReport",
    "CalibrationReport",
    "CandidateRow",
    "ComplexityCombination",
    "ConfigMismatchError",
    "DepthAssignment",
    "DepthStats",
    "DomainError",
    "DuplicateSampleError",
    "EpsilonEstimate",
    "ExitboundError",
    "ExitRecord",
    "ExitTrace",
    "ExplicitBound",
    "HeaderMismatchError",
    "MissingInputError",
    "PartialResultError",
    "PolicyConfig",
    "SampleComplexity",
    "SampleRecord",
    "SelectionResult",
    "TraceHeader",
    "TraceParseError",
    "TraceSchemaError",
    "TraceSplits",
    "TrainingDivergedError",
    "UnlabeledTraceError",
    "advantage",
    "apply_policy",
    "bound_report",
    "compare_with_validation",
    "depth_kl_identity",
    "depth_stats",
    "depth_weighted_complexity",
    "deterministic_bound",
    "dumps_trace",
    "ece",
    "epsilon_bound",
    "epsilon_estimate",
    "epsilon_penalty",
    "explicit_bound",
    "gap",
    "gaussian_kl",
    "load_trace",
    "loads_trace",
    "main_bound",
    "mean_policy_loss",
    "naive_lnk_bound",
    "policy_accuracy",
    "policy_sweep",
    "predictive_entropy",
    "sample_complexity",
    "select_threshold",
    "split_trace",
    "stable_softmax",
    "weighted_bound",
    "write_trace",
]
