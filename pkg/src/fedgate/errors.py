"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
DivergenceError -> 3.
"""


class FedgateError(Exception):
    """Base class for all package errors."""


class ConfigError(FedgateError):
    """Invalid run configuration or CLI usage.

    Carries the full list of violations so a bad config file reports
    every problem at once instead of one per invocation.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataError(FedgateError):
    """Malformed or missing input data."""


class DegenerateScaleError(DataError):
    """An operation that divides by a scale parameter got std = 0."""


class DivergenceError(FedgateError):
    """A local solve produced non-finite weights."""

    def __init__(self, message, epoch=None, round_index=None, client_id=None):
        super().__init__(message)
        self.epoch = epoch
        self.round_index = round_index
        self.client_id = client_id
