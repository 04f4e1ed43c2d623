"""Exception hierarchy shared across the package."""


class RumdpError(Exception):
    """Base class for all errors raised by rumdp."""


class InvalidDiscountError(RumdpError):
    pass


class InvalidInstanceError(RumdpError):
    """An Mdp or polytope violates one of its structural invariants."""


class LinearSolveError(RumdpError):
    pass


class InfeasiblePolytopeError(RumdpError):
    pass


class DegeneratePolytopeError(RumdpError):
    """The polytope is nonempty but has no interior."""


class UnboundedPolytopeError(RumdpError):
    pass


class LpNumericalError(RumdpError):
    """The simplex ran out of its pivot budget or lost feasibility."""


class PreconditionError(RumdpError):
    pass


class InstanceTooLargeError(RumdpError):
    pass


class BudgetExceededError(RumdpError):
    """A safety cap tripped; ``partial`` holds whatever was collected."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MalformedFileError(RumdpError):
    pass


class VersionMismatchError(MalformedFileError):
    pass
