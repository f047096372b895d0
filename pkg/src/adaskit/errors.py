"""Exception types shared across the package."""


class AdaskitError(Exception):
    """Base class for all package errors."""


class InvalidStateError(AdaskitError):
    """A continuous vehicle state contains non-finite or out-of-range fields."""


class ManeuverDivergenceError(AdaskitError):
    """A simulated lane change failed to converge within the time budget.

    Model builders treat this as a crash outcome; direct callers see the error.
    """

    def __init__(self, message, elapsed=None):
        super().__init__(message)
        self.elapsed = elapsed


class StateSpaceLimitError(AdaskitError):
    """State-space exploration exceeded the configured state cap."""


class PctlSyntaxError(AdaskitError):
    """Formula text failed to parse.

    Carries the 1-based position of the offending token and the set of
    token kinds that would have been accepted there.
    """

    def __init__(self, message, line, column, expected=()):
        super().__init__(f"{message} at line {line}, column {column}"
                         + (f" (expected {', '.join(sorted(expected))})" if expected else ""))
        self.line = line
        self.column = column
        self.expected = frozenset(expected)


class VerificationError(AdaskitError):
    """Model checking could not be carried out (e.g. unlabeled proposition)."""


class IterationLimitError(AdaskitError):
    """Numeric fixed-point solver hit its sweep cap before converging."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class PolicyDomainError(AdaskitError):
    """A policy does not define an action for a reachable state."""


class LabelingError(AdaskitError):
    """A labeling predicate is unknown."""


class ConfigError(AdaskitError):
    """A configuration file violated a parameter invariant or schema."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class SamplingError(AdaskitError):
    """Scenario sampling could not produce a feasible sample."""
