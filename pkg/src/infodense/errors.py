"""Exception hierarchy shared by every stage of the toolkit.

The CLI maps these onto process exit codes: config/contract problems
exit 2, data problems exit 3, numeric failures exit 4.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ToolkitError):
    """Invalid configuration: unknown keys, bad schema, malformed header."""


class ContractError(ConfigError):
    """A call violated an operation precondition (bad k, shape mismatch...)."""


class DataError(ToolkitError):
    """The input data cannot support the requested computation."""


class MissingSensorError(DataError):
    """A requested sensor has no records at all."""


class EmptyResultError(DataError):
    """Alignment or filtering left nothing to work with."""


class DegenerateSensorError(DataError):
    """A sensor's series is constant (zero variance) where variance is required."""


class InsufficientDataError(DataError):
    """Too few samples or frames for the requested operation."""


class NumericError(ToolkitError):
    """Numerical failure: non-finite gradients, degenerate matrices."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def exit_code_for(exc: BaseException) -> int:
    """Exit code the CLI should use for *exc*."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return 1
