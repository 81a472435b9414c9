"""Exception and warning types."""


class KteError(Exception):
    """Base class for all library errors."""


class InvalidSpec(KteError, ValueError):
    pass


class OutOfDomain(KteError, ValueError):
    pass


class NotSuperlinear(KteError, ValueError):
    """The conjugate of the cost is not finite everywhere."""


class Delta2Violation(KteError, ValueError):
    pass


class InvalidOrder(KteError, ValueError):
    pass


class Unbounded(KteError, ValueError):
    pass


class SizeLimit(KteError, ValueError):
    pass


class QuadratureFailure(KteError, RuntimeError):
    pass


class PreconditionViolation(KteError, ValueError):
    def __init__(self, clause, message=""):
        self.clause = clause
        super().__init__(f"{clause}: {message}" if message else clause)


class WindowExceedsGrid(UserWarning):
    """The Hopf-Lax search window was clipped by the grid boundary."""
