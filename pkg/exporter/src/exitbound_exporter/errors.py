class ExporterError(Exception):
    """Base class for exporter failures."""


class ModelLoadError(ExporterError):
    """Unknown model identifier or unloadable model."""


class HookAttachmentError(ExporterError):
    """A configured exit layer does not exist or fired out of order."""


class DatasetError(ExporterError):
    """Unknown dataset identifier or malformed dataset file."""
