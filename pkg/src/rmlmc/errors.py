"""Exception hierarchy shared by all rmlmc modules."""


class RMLMCError(Exception):
    """Base class for rmlmc errors."""


class ShapeError(RMLMCError, ValueError):
    """Input arrays have inconsistent or invalid lengths."""


class DomainError(RMLMCError, ValueError):
    """Input values fall outside the mathematical domain of an operation."""


class DegenerateProfileError(DomainError):
    """A moment profile has a zero (or negative) entry where positivity is required."""


class ContractViolation(RMLMCError, RuntimeError):
    """A user-supplied sampler broke its documented contract."""


class ResourceCapError(RMLMCError, RuntimeError):
    """A run exceeded its configured work budget.

    ``partial`` carries whatever was accumulated before the cap was hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
