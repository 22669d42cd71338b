"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Structurally invalid input (non-Hermitian matrix, bad file, dim mismatch)."""


class ParameterError(ValueError):
    """Invalid objective or solver parameters (bad weights, radii, steps)."""


class DomainError(ValueError):
    """Argument outside the domain of a convex objective."""


class UnsupportedObjectiveError(ValueError):
    """Objective lacks an oracle required by the requested operation."""
