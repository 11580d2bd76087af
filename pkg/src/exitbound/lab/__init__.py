"""Desk-scale laboratory: synthetic data, a small multi-exit network trained
with explicit backpropagation, trace emission, and the experiment harness."""

from .data import Dataset, SyntheticData, SyntheticSpec, generate_dataset
from .net import (
    MultiExitNet,
    emit_trace,
    gradient_check,
    train_linear_probe,
    train_model,
)
from .experiment import (
    ExperimentResult,
    PolicyRow,
    PolicySummary,
    default_policy_grid,
    default_tau_grid,
    gap_ordering,
    run_experiment,
)

__all__ = [
    "Dataset",
    "SyntheticData",
    "SyntheticSpec",
    "generate_dataset",
    "MultiExitNet",
    "emit_trace",
    "gradient_check",
    "train_linear_probe",
    "train_model",
    "ExperimentResult",
    "PolicyRow",
    "PolicySummary",
    "default_policy_grid",
    "default_tau_grid",
    "gap_ordering",
    "run_experiment",
]
