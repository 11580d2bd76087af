"""Forward-hook trace exporter for multi-exit torch models.

Writes the line-delimited exit-trace format (format_version=1) consumed by
the analysis toolkit; the file format is the only coupling between the two
packages.
"""

from .config import ExporterConfig
from .errors import DatasetError, ExporterError, HookAttachmentError, ModelLoadError
from .export import export_trace
from .reference import reference_dataset, reference_model
from .registry import EXIT_LAYER_REGISTRY, MODEL_REGISTRY

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "EXIT_LAYER_REGISTRY",
    "ExporterConfig",
    "ExporterError",
    "HookAttachmentError",
    "MODEL_REGISTRY",
    "ModelLoadError",
    "export_trace",
    "reference_dataset",
    "reference_model",
]
