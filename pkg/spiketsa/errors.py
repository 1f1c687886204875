"""Exception hierarchy for spiketsa."""


class SpikeTSAError(Exception):
    """Base class for every error raised by spiketsa."""
    pass


class ShapeError(SpikeTSAError, ValueError):
    """Raised when tensor shapes or extents are incompatible."""
    pass


class NonFiniteError(SpikeTSAError, ValueError):
    """Raised when NaN or Inf values reach a tensor boundary."""
    pass


class GraphError(SpikeTSAError, RuntimeError):
    """Raised when backward is requested for a tensor no forward pass produced."""
    pass


class ConfigError(SpikeTSAError, ValueError):
    """Raised when a model, training or run configuration is invalid."""
    pass


class DataError(SpikeTSAError, ValueError):
    """Raised when input data cannot be used."""
    pass


class MissingColumnError(DataError):
    """Raised when a CSV file lacks a column named by the schema."""
    pass


class CsvParseError(DataError):
    """Raised when a CSV cell cannot be parsed as a number or timestamp."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyFileError(DataError):
    """Raised when a CSV file has no data rows."""
    pass


class DuplicateTimestampError(DataError):
    """Raised when a series file repeats a timestamp."""
    pass


class GapError(DataError):
    """Raised when a series has gaps that cannot be forward-filled."""
    pass


class ZeroVarianceError(DataError):
    """Raised when a channel has zero variance and cannot be z-scored."""
    pass


class CheckpointError(DataError):
    """Raised when a checkpoint file cannot be read."""
    pass


class CheckpointIntegrityError(CheckpointError):
    """Raised when a checkpoint is truncated or its digest does not match."""
    pass


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint uses an unsupported schema version."""
    pass


class InvariantError(SpikeTSAError, AssertionError):
    """Raised when an internal invariant is violated."""
    pass
