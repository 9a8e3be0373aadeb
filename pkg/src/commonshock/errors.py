"""Exception hierarchy shared across the package."""


class CommonShockError(Exception):
    """Base class for all errors raised by this package."""


class DataError(CommonShockError):
    """Invalid claim data (non-positive cells, shape mismatches, parse failures)."""


class DesignError(CommonShockError):
    """Design matrices cannot be built or are unusable (rank zero, unobservable parameters)."""


class ConfigError(CommonShockError):
    """Invalid run configuration."""


class NumericalError(CommonShockError):
    """Numerical failure during estimation or forecasting."""

    def __init__(self, message, last_omega=None, score_norm=None):
        super().__init__(message)
        self.last_omega = last_omega
        self.score_norm = score_norm
