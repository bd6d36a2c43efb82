"""Exception taxonomy.

Every exception carries the process exit code the command-line front end
maps it to: 0 ok, 2 no dominant mode, 3 conditioning, 4 data, 5 usage.
"""

from __future__ import annotations


class OsclocError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(OsclocError):
    """Bad invocation: invalid flags, parameters, or missing files."""

    exit_code = 5


class SchemaError(OsclocError):
    """Input file does not match the wide-CSV schema."""

    exit_code = 4


class DataError(OsclocError):
    """Input data content is unusable (gaps, bad timestamps, non-physical values)."""

    exit_code = 4


class NumericError(OsclocError):
    """A numerical routine failed or produced non-finite results."""

    exit_code = 4


class NoDominantModeError(OsclocError):
    """No spectral peak stands out from the noise floor in the search band."""

    exit_code = 2


class ConditioningError(OsclocError):
    """Results are too ill-conditioned to rank (e.g. the participation trace
    identity is violated beyond tolerance)."""

    exit_code = 3


class DesignError(UsageError):
    """Filter design rejected (bad corner frequencies or order)."""


class LengthError(UsageError):
    """A signal is too short for the requested operation."""


class ScenarioError(UsageError):
    """Synthetic scenario is inconsistent or infeasible."""
