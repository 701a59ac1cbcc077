"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`KinbayesError`. The CLI maps the categories to exit codes
(see ``kinbayes.cli.EXIT_CODES``).
"""


class KinbayesError(Exception):
    """Base class for all package errors."""


class ContractError(KinbayesError, ValueError):
    """A precondition of an operation was violated by the caller."""


class ConfigError(KinbayesError):
    """Invalid run configuration."""


class ModelSyntaxError(KinbayesError):
    """Malformed model document."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}"
            if col is not None:
                where += f", col {col}"
            where += ": "
        super().__init__(where + message)


class ConservationError(KinbayesError):
    """A declared conservation law is violated."""


class IngestionError(KinbayesError):
    """Observation data could not be loaded."""


class DecodeError(KinbayesError):
    """A serialized stream state is malformed."""


class RunawaySimulationError(KinbayesError):
    """A simulation exceeded its event cap."""


class CountOverflowError(KinbayesError):
    """A species count left the supported integer range."""


class InfeasibleIntervalError(KinbayesError):
    """No accepted trajectory within the attempt budget."""

    def __init__(self, message, attempts):
        self.attempts = attempts
        super().__init__(message)


class ReplayMismatchError(KinbayesError):
    """A replayed trajectory did not reproduce the stored segment."""


class ImproperPosteriorError(KinbayesError):
    """A gamma full conditional has zero shape or zero rate."""

    def __init__(self, message, reaction=None):
        self.reaction = reaction
        super().__init__(message)


class RateUnderflowError(KinbayesError):
    """A rate draw from a proper gamma law rounded to zero."""

    def __init__(self, message, reaction=None):
        self.reaction = reaction
        super().__init__(message)


class StateSpaceTooLargeError(KinbayesError):
    """Reachable state enumeration exceeded its cap."""


class UndefinedBridgeError(KinbayesError):
    """Bridge law requested for an endpoint pair of probability zero."""


class DegenerateVarianceError(KinbayesError):
    """All chains have zero within-chain variance."""
