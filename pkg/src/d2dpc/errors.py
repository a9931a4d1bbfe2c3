"""Exception taxonomy shared by all modules."""


class SchemeError(Exception):
    """Base class for all scheme-level failures."""


class InvalidParameter(SchemeError, ValueError):
    """An argument violates a documented precondition."""


class DivisibilityError(InvalidParameter):
    """A size does not divide evenly into the required pieces."""


class InstanceTooLarge(SchemeError):
    """The instance would exceed configured size limits."""


class ProtocolViolation(SchemeError):
    """A run produced an inconsistent or undecodable state."""


class BudgetExceeded(SchemeError):
    """Exhaustive enumeration would exceed the tape budget."""
