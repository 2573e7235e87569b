"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """A physical or numerical parameter violates its constraints."""


class ConfigError(ValueError):
    """A run configuration fails schema validation."""


class DataFormatError(ValueError):
    """A data file cannot be parsed; carries the offending row when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class FitError(RuntimeError):
    """Base class for fitting failures."""


class ConvergenceError(FitError):
    """The minimizer did not reach its convergence criteria."""


class RankDeficiencyError(FitError):
    """The Jacobian is rank deficient; names the unidentifiable combination."""

    def __init__(self, message, parameters=()):
        super().__init__(message)
        self.parameters = tuple(parameters)


class IntegrationError(RuntimeError):
    """Numerical integration failed to converge; carries the achieved tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class StiffnessError(RuntimeError):
    """Rates too fast for the requested fixed-step integration."""


class NoDecayError(ValueError):
    """A transient contains no fittable decay."""
