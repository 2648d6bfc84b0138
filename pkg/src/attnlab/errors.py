"""Error types shared across the package."""


class ShapeMismatch(ValueError):
    """Operands have incompatible shapes; the message names both."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition."""


class DegenerateRegion(ValueError):
    """A normalization slice has no valid entries left."""


class NumericFault(ArithmeticError):
    """A computation produced non-finite values."""
