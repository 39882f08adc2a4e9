"""Shared exception types."""

import queue


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class FormatError(ValueError):
    """Malformed input file; carries the 1-based line/column of the offending token."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class RangeError(ValueError):
    """Value outside its documented domain."""


class EmptyDataError(ValueError):
    """An operation that needs at least one datapoint got none."""


class DigestMismatch(ValueError):
    """Artifact bound to a different constraint-system digest."""


class MalformedProof(ValueError):
    """Proof payload is structurally unusable."""


class ArtifactMismatch(ValueError):
    """On-disk artifact does not match its declared digest or kind."""


class MissingMetrics(FileNotFoundError):
    """No metrics files found where a report was requested."""


class QueueFull(queue.Full):
    """Bounded inbox rejected a batch (balking mode)."""
