"""Exception hierarchy shared by the library, service, and CLI."""


class ChronorecError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ChronorecError):
    """Invalid or inconsistent input data (corpus files, configs, artifacts)."""


class NumericalError(ChronorecError):
    """Numerical failure during training or scoring (NaN loss, divergence)."""
