"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """An iterative method or quadrature failed to converge."""


class SupportLookupError(LookupError):
    """A value or index is not part of a distribution's support."""


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""
