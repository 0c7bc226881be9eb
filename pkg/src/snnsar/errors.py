"""Exception hierarchy.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, numeric/model problems exit 3.
"""


class SnnError(Exception):
    exit_code = 3


class DataError(SnnError):
    """Bad input files, directories or datasets."""

    exit_code = 2


class FormatError(DataError):
    """A file does not follow the expected on-disk format."""


class ConfigError(SnnError):
    """Invalid run configuration."""

    exit_code = 1

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(SnnError, ValueError):
    """Shapes of arrays or layers do not line up."""


class DomainError(SnnError, ValueError):
    """A scalar argument lies outside its admissible range."""


class NumericError(SnnError, ValueError):
    """Non-finite or otherwise unusable numeric values."""


class ModelError(SnnError):
    """A model is missing, untrained, or inconsistent."""
