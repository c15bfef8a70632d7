"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: usage/configuration problems exit 1,
bad input data exits 2, numeric failures during training exit 3.
"""


class LatsegError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(LatsegError):
    """Bad API usage or bad command-line invocation."""

    exit_code = 1


class ConfigError(UsageError):
    """Invalid configuration value (e.g. dropout probability >= 1)."""


class ShapeError(UsageError):
    """Operand shapes do not conform; message names the operands."""


class DataError(LatsegError):
    """Malformed input data (corpus, embedding file, lexicon, ...)."""

    exit_code = 2


class FormatError(DataError):
    """A structured file violates its declared format."""


class CheckpointError(DataError):
    """Checkpoint directory is inconsistent or does not match its manifest."""


class NumericError(LatsegError):
    """Non-finite value encountered where finite numbers are required."""

    exit_code = 3
