"""
Exception types raised by the toolkit.
"""


class ToolkitError(ValueError):
    """Base class for every error the toolkit raises on bad input."""


class ManifestError(ToolkitError):
    """A manifest or CSV row could not be parsed."""

    def __init__(self, row: int, field: str, message: str):
        self.row = row
        self.field = field
        super().__init__(f"row {row}, field '{field}': {message}")


class RecordInvariantError(ToolkitError):
    """A parsed record violates a domain invariant."""

    def __init__(self, video_id: str, rule: str):
        self.video_id = video_id
        self.rule = rule
        super().__init__(f"video '{video_id}': {rule}")


class EmbeddingFormatError(ToolkitError):
    pass


class TraceFormatError(ToolkitError):
    pass


class ShapeError(ToolkitError):
    pass


class RngStreamMismatchError(ToolkitError):
    """Dropout masks replayed during backward differ from the forward pass."""


class MetricInputError(ToolkitError):
    pass


class ConfigError(ToolkitError):
    pass


class CheckpointError(ToolkitError):
    pass


class NonFiniteGradientError(ToolkitError):
    """A gradient contains NaN or Inf; the optimizer step is aborted."""
