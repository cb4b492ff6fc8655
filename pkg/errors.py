"""
Exception hierarchy for the dual-decoding toolkit.

Core modules raise these; the command-line layer maps them to exit codes.
"""


class DualDecodingError(Exception):
    """Base class for every error raised by the toolkit."""


class InputError(DualDecodingError):
    """Malformed or missing user input (files, corpora, token sequences)."""


class ConfigError(DualDecodingError):
    """Configuration schema violation or inconsistent settings."""


class CheckpointError(DualDecodingError):
    """Unreadable, truncated or incompatible model checkpoint."""


class NumericError(DualDecodingError):
    """NaN or infinite values where finite numbers are required."""


class DimensionError(DualDecodingError):
    """Tensor shapes that do not fit together."""


class DegenerateMaskError(DualDecodingError):
    """An attention mask row that admits no key at all."""


class ContractError(DualDecodingError):
    """A caller broke a documented precondition of an operation."""


class TapeError(DualDecodingError):
    """Inconsistent autodiff tape (cycle, non-scalar loss)."""


class DomainError(DualDecodingError):
    """Argument outside the mathematical domain of a function."""
