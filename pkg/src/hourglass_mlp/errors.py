"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes (config -> 2, data -> 3, numerics -> 4).
"""


class HourglassError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(HourglassError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(HourglassError):
    """Input values are outside the operation's domain (empty matrix, zero dims, ...)."""


class ConfigError(HourglassError):
    """Invalid configuration: unknown tag, bad key, constraint violation."""


class StateError(HourglassError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class NumericsError(HourglassError):
    """Non-finite values where finite ones are required (NaN gradients, NaN loss)."""


class DataError(HourglassError):
    """Dataset-level failure: missing files, bad splits, missing classes."""


class IdxParseError(DataError):
    """Malformed IDX file (bad magic, truncated payload, count mismatch)."""


class RawTensorParseError(DataError):
    """Malformed raw-tensor file."""


class CheckpointError(HourglassError):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """File does not start with the checkpoint magic."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported by this build."""


class CheckpointTruncatedError(CheckpointError):
    """File ends before the declared payload does."""


class CheckpointChecksumError(CheckpointError):
    """Payload bytes do not match the trailing checksum."""
