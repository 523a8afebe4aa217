"""Exception hierarchy shared across the toolkit."""


class RobustkitError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(RobustkitError):
    """Dataset content violates the declared column schema."""


class ContractError(RobustkitError):
    """A function was called with arguments violating its contract."""


class InsufficientDataError(RobustkitError):
    """Not enough rows/columns to compute the requested statistic."""


class FactorizationError(RobustkitError):
    """Correlation matrix could not be factored even after repair."""


class ScoringError(RobustkitError):
    """External or builtin model scoring failed."""
