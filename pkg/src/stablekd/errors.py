"""Exception taxonomy shared by all stablekd modules.

Configuration-style errors (bad configs, bad data, bad files) map to CLI
exit code 2; violated numerical contracts map to exit code 3.
"""


class StableKDError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StableKDError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigurationError(StableKDError):
    """A hyperparameter, layer spec, or config value is out of range."""


class BuildError(StableKDError):
    """A network cannot be constructed from the given layer specs."""


class ContractError(StableKDError):
    """A caller violated an operation precondition."""


class DataError(StableKDError):
    """Dataset contents violate their invariants (labels, sizes)."""


class FormatError(StableKDError):
    """A serialized file is malformed; message carries the byte offset."""


class IncompatibilityError(StableKDError):
    """Teacher/student activations disagree at a block boundary."""


class ValidationError(StableKDError):
    """A partition violates one of its invariants."""


class OracleError(StableKDError):
    """The finite-difference oracle could not be evaluated."""


# Errors that indicate a bad config/dataset rather than a numerical defect.
CONFIG_ERRORS = (
    ConfigurationError,
    BuildError,
    DataError,
    FormatError,
    ValidationError,
    DimensionError,
    IncompatibilityError,
)
