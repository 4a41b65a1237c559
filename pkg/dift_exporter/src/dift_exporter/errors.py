"""Exporter failure modes."""


class ExporterError(Exception):
    """Base class for exporter failures."""


class ModelLoadError(ExporterError):
    """The requested checkpoint could not be resolved or loaded."""


class ShapeMismatch(ExporterError):
    """Captured activations are inconsistent with the expected dimensions."""
