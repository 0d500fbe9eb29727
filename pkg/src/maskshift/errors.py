"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: config/usage problems
exit 2, I/O and file-format problems exit 3, violated internal
invariants exit 4.
"""


class MaskshiftError(Exception):
    """Base class for all package errors."""


class ConfigError(MaskshiftError):
    """Invalid configuration value or unusable parameter."""


class DataError(MaskshiftError):
    """Dataset violates a precondition (empty, bad labels, ...)."""


class DimensionError(MaskshiftError):
    """Array shapes do not agree."""


class NumericError(MaskshiftError):
    """Non-finite value encountered where finiteness is required."""


class FormatError(MaskshiftError):
    """A serialized artifact failed validation (bad magic, truncation, ...)."""


class StateError(MaskshiftError):
    """An operation was invoked before its required state exists."""


class DeterminismError(MaskshiftError):
    """A function expected to be deterministic returned differing values."""


class GroupingError(MaskshiftError):
    """Records from different experiment cells were mixed in one aggregate."""


class FreezeViolationError(MaskshiftError):
    """A frozen weight drifted during fine-tuning (internal invariant)."""
