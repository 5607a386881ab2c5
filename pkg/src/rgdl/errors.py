"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed input: bad counts, mismatched dimensions, invalid values."""


class DomainError(ValueError):
    """Input outside an operation's mathematical domain (wrong lattice kind,
    out-of-range site index, negative coupling where ferromagnetic required)."""


class CapacityError(ValueError):
    """System too large for exact enumeration."""
