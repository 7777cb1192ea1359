"""Exception hierarchy shared by the front-end, training loop and CLI."""


class ModFrontError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ModFrontError, ValueError):
    """Invalid configuration value or parameter range."""

    exit_code = 2


class InputTooShortError(ModFrontError, ValueError):
    """Signal shorter than the kernel it is convolved with."""

    exit_code = 4


class ParameterError(ModFrontError, ValueError):
    """Filter parameters outside their feasible set."""

    exit_code = 4


class NumericError(ModFrontError, FloatingPointError):
    """Non-finite values encountered in a gradient, loss or parameter block."""

    exit_code = 4

    def __init__(self, message, block=None, last_good=None):
        super().__init__(message)
        self.block = block
        self.last_good = last_good


class UndefinedMetricError(ModFrontError, ValueError):
    """Metric undefined for the given labels (e.g. a single class present)."""

    exit_code = 4


class ArtifactIOError(ModFrontError, OSError):
    """Malformed or unreadable file (WAV, checkpoint, matrix artifact)."""

    exit_code = 3
