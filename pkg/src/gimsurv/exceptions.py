"""Exception hierarchy shared by the library and the command line front-end."""


class GimSurvError(Exception):
    """Base class for all package errors."""


class DomainError(GimSurvError, ValueError):
    """A parameter or time value lies outside the model's support."""


class DataFormatError(GimSurvError, ValueError):
    """Input data could not be parsed or failed validation."""


class DegenerateDataError(GimSurvError, ValueError):
    """The likelihood has no interior maximizer for the given data."""


class DegenerateConfigurationError(GimSurvError, RuntimeError):
    """Monte Carlo simulation could not produce estimable replicates."""
