from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ExporterError


@dataclass(frozen=True)
class ExporterConfig:
    """Everything one export run needs.

    ``model`` is a registry name (see ``MODEL_REGISTRY``); ``exit_layers``
    are dotted submodule names whose forward outputs are the per-exit
    logits, listed shallow to deep.  Their firing order during the forward
    pass is validated against this list.  ``dataset`` is either
    ``builtin:reference`` or the path to an ``.npz`` file with an ``X``
    array (n, d) and an optional 1-based ``y`` array (n,).
    """

    model: str
    exit_layers: tuple
    dataset: str
    output_path: str
    split: str = "test"
    batch_size: int = 32
    max_samples: Optional[int] = None

    def __post_init__(self):
        layers = tuple(self.exit_layers)
        object.__setattr__(self, "exit_layers", layers)
        if not layers:
            raise ExporterError("exit_layers must be nonempty")
        if len(set(layers)) != len(layers):
            raise ExporterError("exit_layers must be distinct")
        if self.batch_size < 1:
            raise ExporterError("batch_size must be >= 1")
        if self.max_samples is not None and self.max_samples < 1:
            raise ExporterError("max_samples must be >= 1 when given")
        if self.split not in ("train", "validation", "calibration", "test"):
            raise ExporterError(f"unknown split {self.split!r}")

    @property
    def K(self) -> int:
        return len(self.exit_layers)
