"""Exception hierarchy.

Validation problems derive from ``ValidationError`` (CLI exit code 2); solver
non-convergence is ``ToleranceNotReached`` (exit code 3).
"""


class FairDivError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(FairDivError, ValueError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NegativeValue(ValidationError):
    pass


class NonPositiveBudget(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class SharesExceedOne(ValidationError):
    pass


class NoPositiveValueItems(ValidationError):
    pass


class ZeroInfeasibleConstraint(ValidationError):
    pass


class NonPositiveArgument(ValidationError):
    pass


class RuleParseError(ValidationError):
    pass


class InvalidTolerance(ValidationError):
    pass


class TooLargeForOracle(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class MalformedCSV(ValidationError):
    pass


class NegativeCount(ValidationError):
    pass


class NegativeBid(ValidationError):
    pass


class DegenerateBaseline(ValidationError):
    pass


class NoEligibleAgents(ValidationError):
    pass


class InfeasibleRegion(FairDivError):
    """The LP region has no feasible point. Cannot happen when 0 is feasible."""


class ToleranceNotReached(FairDivError):
    """Frank-Wolfe gap still above tolerance after ``max_iter`` iterations.

    The partial report is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
