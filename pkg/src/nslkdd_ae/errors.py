"""Exception types shared across the pipeline."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, schemas, model documents)."""


class NumericError(ArithmeticError):
    """A computation produced NaN/Inf where a finite value is required."""


class ShapeError(ValueError):
    """Operand dimensions do not agree."""
