"""Exception types shared across the package."""


class SclError(Exception):
    """Base class for all package errors."""


class DomainError(SclError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class SingularPoint(DomainError):
    """The stereographic projection was evaluated at the north pole."""


class InvariantViolation(SclError):
    """A constructed object failed one of its declared invariants."""


class BudgetExceeded(SclError):
    """A sampler exceeded its configured step or state budget."""


class TruncationOverflow(SclError):
    """Truncated probability mass grew past the configured bound."""


class ShapeMismatch(SclError, ValueError):
    """A barrier event does not match any supported bound shape."""


class SizeMismatch(SclError, ValueError):
    """Two empirical samples that must be equal-sized are not."""
