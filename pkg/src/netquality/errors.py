"""Exception types shared across the package."""


class NetqualityError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecordError(NetqualityError):
    """An input record could not be parsed or violates a field constraint."""

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class IngestError(NetqualityError):
    """Event streams violate a dataset-level invariant (e.g. duplicate photo ids)."""


class UnknownUserError(NetqualityError):
    """An operation referenced a user that is not in the graph."""


class UndefinedStatisticError(NetqualityError):
    """The requested statistic is mathematically undefined on this input."""


class UnbalanceableCovariateError(NetqualityError):
    """A covariate has zero treatment-group variance but unequal group means."""


class BalanceRestartError(NetqualityError):
    """Control-group pruning exhausted the pool; rerun with a different seed group."""

    def __init__(self, message, iterations=0):
        self.iterations = iterations
        super().__init__(message)


class ConfigError(NetqualityError):
    """A configuration file or object has invalid fields."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))
