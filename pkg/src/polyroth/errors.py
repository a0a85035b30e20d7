"""Exception types shared by all modules."""


class PolyRothError(Exception):
    pass


class PreconditionError(PolyRothError, ValueError):
    """An input violates a documented precondition."""


class DomainError(PolyRothError, ValueError):
    """A value lies outside the range where the operation is defined."""


class UnresolvedError(PolyRothError, RuntimeError):
    """A numerical procedure did not reach its tolerance within budget.

    ``estimate`` holds the best value found so far, if any.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConstructionExhausted(PolyRothError, RuntimeError):
    """A search ran past its sweep limit without meeting its constraints."""


class NotFound(PolyRothError, LookupError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CheckFailed(PolyRothError, AssertionError):
    """A verification routine observed a violated property."""
